#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ctxlake/envelope.hpp"
#include "ctxlake/kernel.hpp"
#include "ctxlake/memory.hpp"

namespace ctxlake {

class TransformationRegistry;

/// One violation code per closure condition: a decision with shared effects
/// must cite no private context, draw every premise from one causal cut,
/// act strictly inside its decision window, and justify itself only with
/// explicit shared semantics.
enum class ViolationCode {
    kPrivatePremise,
    kMixedCut,
    kStalePremise,
    kImplicitSemantics,
};

std::string_view violation_name(ViolationCode code);
ViolationCode violation_from_name(std::string_view name);

enum class PremiseKind { kBase, kSemantic };

/// A store reference cited as justification. A premise is non-private
/// exactly when it resolves in the shared store at its cut.
struct PremiseRef {
    Layer layer = Layer::kState;
    std::string key;
    CutId cut;
    LogicalTime retrieved_at;
    PremiseKind kind = PremiseKind::kBase;
};

struct Effect {
    enum class Kind { kStateWrite, kSemanticWrite, kEpisodeAppend, kExternalAction };
    Kind kind;
    std::string target;  // store key, or action name for external effects
};

struct DecisionRecord {
    std::string decision_id;
    std::string agent_id;
    std::vector<PremiseRef> premises;
    /// Honest self-declaration that context outside the store influenced the
    /// decision; the gate cannot see inside agent memory.
    bool opaque_context_declared = false;
    LogicalTime decided_at;
    std::vector<Effect> effects;
    bool shared_effects = true;
};

/// decided_at must not precede any retrieval and the decision must intend at
/// least one effect.
bool well_formed(const DecisionRecord& d);

struct Verdict {
    bool admitted = false;
    std::vector<ViolationCode> violations;  // in ViolationCode order, deduplicated

    std::vector<std::string> violation_names() const;
};

/// Evaluates decisions against the closure conditions and the temporal
/// envelope, and commits admissible ones through the kernel. check() is a
/// pure function of (decision, envelope, latest cut, store contents):
/// deterministic and side-effect free.
class Gate {
public:
    /// Which conditions the gate enforces. All on for a Context Lake;
    /// degraded scenario configurations switch individual conditions off to
    /// let the corresponding failure mode manifest.
    struct Checks {
        bool private_premise = true;
        bool mixed_cut = true;
        bool stale_premise = true;
        bool implicit_semantics = true;
    };

    Gate(Kernel& kernel, MemoryStore& memory, const TransformationRegistry& registry,
         EnvelopeConfig envelope)
        : kernel_(kernel), memory_(memory), registry_(registry), envelope_(envelope) {
        envelope_.validate();
    }

    Verdict check(const DecisionRecord& d) const { return check(d, kernel_.begin_snapshot()); }
    Verdict check(const DecisionRecord& d, CutId latest) const;

    /// Commits the transaction carrying the decision's writes if the verdict
    /// admits; otherwise aborts it and returns the verdict. External-world
    /// effects are recorded as episodes in the same commit. An inadmissible
    /// decision never produces visible effects. WriteConflict from the
    /// kernel propagates; the loser must re-read at a new cut. When
    /// `committed_writes` is given it receives the full staged write set
    /// (including effect episodes) for trace logging.
    std::variant<CutId, Verdict> admit_and_commit(const DecisionRecord& d, Transaction& tx,
                                                  std::vector<PendingWrite>* committed_writes =
                                                      nullptr);

    const EnvelopeConfig& envelope() const { return envelope_; }
    void set_enabled_checks(Checks checks) { checks_ = checks; }

private:
    bool resolvable(const PremiseRef& premise, CutId latest) const;

    Kernel& kernel_;
    MemoryStore& memory_;
    const TransformationRegistry& registry_;
    EnvelopeConfig envelope_;
    Checks checks_;
};

}  // namespace ctxlake

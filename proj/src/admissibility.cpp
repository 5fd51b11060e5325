#include "ctxlake/admissibility.hpp"

#include <set>

#include "ctxlake/semantic.hpp"

namespace ctxlake {

std::string_view violation_name(ViolationCode code) {
    switch (code) {
        case ViolationCode::kPrivatePremise: return "PrivatePremise";
        case ViolationCode::kMixedCut: return "MixedCut";
        case ViolationCode::kStalePremise: return "StalePremise";
        case ViolationCode::kImplicitSemantics: return "ImplicitSemantics";
    }
    return "Unknown";
}

ViolationCode violation_from_name(std::string_view name) {
    if (name == "PrivatePremise") return ViolationCode::kPrivatePremise;
    if (name == "MixedCut") return ViolationCode::kMixedCut;
    if (name == "StalePremise") return ViolationCode::kStalePremise;
    if (name == "ImplicitSemantics") return ViolationCode::kImplicitSemantics;
    throw Error(ErrorCode::kParseError, "unknown violation code '" + std::string(name) + "'");
}

bool well_formed(const DecisionRecord& d) {
    if (d.effects.empty()) return false;
    for (const PremiseRef& premise : d.premises) {
        if (premise.retrieved_at > d.decided_at) return false;
    }
    return true;
}

std::vector<std::string> Verdict::violation_names() const {
    std::vector<std::string> names;
    names.reserve(violations.size());
    for (ViolationCode code : violations) names.emplace_back(violation_name(code));
    return names;
}

bool Gate::resolvable(const PremiseRef& premise, CutId latest) const {
    if (premise.cut > latest) return false;
    return kernel_.read(premise.cut, premise.layer, premise.key).has_value();
}

Verdict Gate::check(const DecisionRecord& d, CutId latest) const {
    Verdict verdict;

    // No decision with shared effects may rest on context that is private to
    // the deciding agent: declared opaque context or any premise that does
    // not resolve in the shared store.
    if (checks_.private_premise && d.shared_effects) {
        bool priv = d.opaque_context_declared;
        for (const PremiseRef& premise : d.premises) {
            if (priv) break;
            priv = !resolvable(premise, latest);
        }
        if (priv) verdict.violations.push_back(ViolationCode::kPrivatePremise);
    }

    // A single decision may not span causal cuts.
    if (checks_.mixed_cut) {
        std::set<std::uint64_t> cuts;
        for (const PremiseRef& premise : d.premises) cuts.insert(premise.cut.value);
        if (cuts.size() >= 2) verdict.violations.push_back(ViolationCode::kMixedCut);
    }

    // Strict window: decision_time - retrieval_time < delta for every
    // premise. Age exactly delta is already outside the window.
    if (checks_.stale_premise) {
        for (const PremiseRef& premise : d.premises) {
            if (premise.retrieved_at > d.decided_at) continue;
            if (d.decided_at.millis - premise.retrieved_at.millis >= envelope_.delta_ms) {
                verdict.violations.push_back(ViolationCode::kStalePremise);
                break;
            }
        }
    }

    // Meaning that influences the decision must be explicit and shared: a
    // semantic premise must resolve to a record carrying registered
    // transformation provenance.
    if (checks_.implicit_semantics) {
        for (const PremiseRef& premise : d.premises) {
            if (premise.kind != PremiseKind::kSemantic) continue;
            bool implicit = true;
            if (premise.cut <= latest) {
                if (auto value = kernel_.read(premise.cut, premise.layer, premise.key)) {
                    auto record = MemoryStore::decode_semantic(premise.key, *value);
                    implicit = !record || record->transform_id.empty() ||
                               record->sources.empty() ||
                               !registry_.is_registered(record->transform_id,
                                                        record->transform_version);
                }
            }
            if (implicit) {
                verdict.violations.push_back(ViolationCode::kImplicitSemantics);
                break;
            }
        }
    }

    verdict.admitted = verdict.violations.empty();
    return verdict;
}

std::variant<CutId, Verdict> Gate::admit_and_commit(const DecisionRecord& d, Transaction& tx,
                                                    std::vector<PendingWrite>* committed_writes) {
    Verdict verdict = check(d);
    if (!verdict.admitted) {
        kernel_.abort_tx(tx);
        return verdict;
    }
    for (const Effect& effect : d.effects) {
        if (effect.kind == Effect::Kind::kExternalAction) {
            memory_.append_external_action(tx, d.decision_id, d.agent_id, effect.target,
                                           d.decided_at);
        }
    }
    if (committed_writes) *committed_writes = tx.write_set();
    return kernel_.commit_tx(tx);
}

}  // namespace ctxlake

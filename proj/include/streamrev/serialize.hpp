#pragma once

// JSON encoding of records. Field order is fixed by nlohmann's sorted
// objects, so equal records serialize to identical bytes.

#include "json.hpp"
#include "streamrev/runtime.hpp"

namespace streamrev {

void to_json(nlohmann::json& j, const Clause& c);
void from_json(const nlohmann::json& j, Clause& c);
void to_json(nlohmann::json& j, const Revision& r);
void from_json(const nlohmann::json& j, Revision& r);
void to_json(nlohmann::json& j, const Specification& s);
void from_json(const nlohmann::json& j, Specification& s);
void to_json(nlohmann::json& j, const ActPayload& a);
void from_json(const nlohmann::json& j, ActPayload& a);
void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);
void to_json(nlohmann::json& j, const Trace& t);
void from_json(const nlohmann::json& j, Trace& t);
void to_json(nlohmann::json& j, const EffectEntry& e);
void from_json(const nlohmann::json& j, EffectEntry& e);
void to_json(nlohmann::json& j, const WorldEntry& e);
void to_json(nlohmann::json& j, const DecisionTriple& d);
void from_json(const nlohmann::json& j, DecisionTriple& d);
void to_json(nlohmann::json& j, const InjectionRecord& r);
void from_json(const nlohmann::json& j, InjectionRecord& r);
void to_json(nlohmann::json& j, const Counters& c);
void from_json(const nlohmann::json& j, Counters& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// Flat grid row: run_id, scenario, rho, policy, revision_type, seed, timing,
/// n_injections, length_mult, wasted_acts, comp_calls, steps, quality,
/// termination, plus realized_rho and token_estimate.
nlohmann::json summary_row(const RunRecord& r);

/// Parses a revision from loose input: rtype is required; missing fields are
/// left empty. Throws ValidationError on malformed input.
Revision revision_from_json(const nlohmann::json& j);

}  // namespace streamrev

#pragma once

// Planning, compatibility and judging oracles. MockBackend follows the
// scenario script deterministically; ChatBackend talks to any
// chat-completions endpoint with tool calling.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "streamrev/core.hpp"
#include "streamrev/scenario.hpp"
#include "streamrev/world.hpp"

namespace streamrev {

struct BackendConfig {
  enum class Kind { Mock, Chat };
  Kind kind = Kind::Mock;
  std::string api_base;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string agent_model;
  std::string judge_model;
  std::string compat_model;
  double agent_temperature = 0.2;
  double judge_temperature = 0.0;
  double compat_temperature = 0.0;
  unsigned judge_runs = 3;
  unsigned max_retries = 3;
  unsigned max_concurrent = 8;  // outstanding requests across all chat clients
  int timeout_seconds = 120;

  /// Chat settings from CHAT_API_BASE, CHAT_API_KEY, AGENT_MODEL, JUDGE_MODEL
  /// and COMPAT_MODEL. Judge and compat models default to the agent model.
  static BackendConfig chat_from_env();
  /// Throws ConfigError when a chat config lacks endpoint, credential or model.
  void validate() const;
};

std::string_view to_string(BackendConfig::Kind k);
BackendConfig::Kind parse_backend_kind(std::string_view s);

/// Everything the planner may look at when choosing the next act.
struct PlanContext {
  const Scenario* scenario = nullptr;
  const Trace* trace = nullptr;
  const EpistemicState* epistemic = nullptr;
  const WorldState* world = nullptr;
  std::uint64_t seed = 0;
};

struct PlanStepResult {
  bool done = false;
  std::string thought;
  ActPayload act;
  std::string obs;  // observation text for the act, when the planner knows it
};

/// Rubric breakdown for one world against one specification.
struct RubricReport {
  std::size_t contradicted_clauses = 0;
  std::size_t stale_entries = 0;
  std::size_t unsatisfiable = 0;
  double score = 5.0;
};

struct JudgeInput {
  const Scenario* scenario = nullptr;
  const Specification* spec = nullptr;  // specification the outcome is judged against
  const WorldState* world = nullptr;
  std::string declared_outcome;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendConfig::Kind kind() const = 0;

  virtual PlanStepResult plan_next(const PlanContext& ctx) = 0;
  /// Only defined for K/X acts; throws ClassError otherwise.
  virtual bool is_compatible(const ActPayload& act, const Specification& spec_new,
                             const ToolRegistry& registry) = 0;
  /// Score in [1, 5].
  virtual double judge_quality(const JudgeInput& in) = 0;
  /// Tokens reported by the provider so far (0 for the mock).
  virtual std::uint64_t tokens_used() const { return 0; }
};

/// True when an effect tag "key=value" contradicts spec: the key has an
/// effective value that differs, or the key was revoked and the value is not
/// "none".
bool tag_conflicts(const std::string& tag, const Specification& spec);

/// Deterministic rubric over the public live entries of the world.
RubricReport rubric(const Specification& spec, const WorldState& world);

class MockBackend final : public Backend {
 public:
  BackendConfig::Kind kind() const override { return BackendConfig::Kind::Mock; }
  PlanStepResult plan_next(const PlanContext& ctx) override;
  bool is_compatible(const ActPayload& act, const Specification& spec_new,
                     const ToolRegistry& registry) override;
  double judge_quality(const JudgeInput& in) override;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace streamrev

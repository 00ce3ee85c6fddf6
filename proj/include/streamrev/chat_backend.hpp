#pragma once

#include <memory>

#include "streamrev/backends.hpp"

namespace streamrev {

/// Chat-completions client. The agent plans through tool calling; the
/// compatibility and judge roles answer with a one-word verdict and a
/// "SCORE: n" line respectively. Malformed answers are retried up to
/// max_retries times, then surface as BackendError.
class ChatBackend final : public Backend {
 public:
  explicit ChatBackend(BackendConfig cfg);
  ~ChatBackend() override;

  BackendConfig::Kind kind() const override { return BackendConfig::Kind::Chat; }
  PlanStepResult plan_next(const PlanContext& ctx) override;
  bool is_compatible(const ActPayload& act, const Specification& spec_new,
                     const ToolRegistry& registry) override;
  double judge_quality(const JudgeInput& in) override;
  std::uint64_t tokens_used() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_api_base(const std::string& base);

/// Parsers for the compat and judge roles; nullopt when the text does not
/// contain a usable verdict.
std::optional<bool> parse_compat_verdict(const std::string& text);
std::optional<double> parse_judge_score(const std::string& text);

}  // namespace streamrev

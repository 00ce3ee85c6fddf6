#pragma once

// Event-sourced world state. The effect log is append-only; rollback of
// R/K/X effects appends invert/compensate/fallback entries. The derived
// view (current entries + unsatisfiable records) is a pure fold of the log.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streamrev/core.hpp"

namespace streamrev {

enum class EffectKind { Create, Modify, Send, Commit, Invert, Compensate, Fallback };
std::string_view to_string(EffectKind k);
EffectKind parse_effect_kind(std::string_view s);

struct EffectEntry {
  std::string entry_id;
  Seq source_seq = 0;  // event that produced this log entry
  EffectKind kind = EffectKind::Create;
  std::string tool;
  ReversibilityClass cls = ReversibilityClass::R;
  bool is_public = false;
  Args content;
  std::vector<std::string> effect_tags;  // "key=value"
  // invert/compensate/fallback: the act whose effect is undone and its entry.
  std::optional<Seq> ref_seq;
  std::optional<std::string> ref_entry;

  friend bool operator==(const EffectEntry&, const EffectEntry&) = default;
};

enum class EntryStatus { Live, Compensated };
std::string_view to_string(EntryStatus s);

struct WorldEntry {
  std::string entry_id;
  std::string subject;  // tool:item, shared by repeated sends of the same thing
  std::string tool;
  ReversibilityClass cls = ReversibilityClass::R;
  bool is_public = false;
  EntryStatus status = EntryStatus::Live;
  Seq source_seq = 0;
  Args content;
  std::vector<std::string> effect_tags;
  std::optional<std::string> compensated_by;  // entry id of the compensation
  // R-class version stack: (producing act seq, content). Top is current.
  std::vector<std::pair<Seq, std::pair<Args, std::vector<std::string>>>> versions;

  friend bool operator==(const WorldEntry&, const WorldEntry&) = default;
};

struct UnsatisfiableRecord {
  Seq action_seq = 0;
  std::string revision_ref;
  std::string note;

  friend bool operator==(const UnsatisfiableRecord&, const UnsatisfiableRecord&) = default;
};

struct WorldView {
  std::map<std::string, WorldEntry> entries;
  std::vector<UnsatisfiableRecord> unsatisfiable;

  friend bool operator==(const WorldView&, const WorldView&) = default;
};

/// Folds a log from scratch. Deterministic: same log, same view.
WorldView fold_log(const std::vector<EffectEntry>& log);

class WorldState {
 public:
  WorldState() = default;

  const std::vector<EffectEntry>& log() const { return log_; }
  const std::map<std::string, WorldEntry>& entries() const { return view_.entries; }
  const std::vector<UnsatisfiableRecord>& unsatisfiable() const { return view_.unsatisfiable; }
  const WorldView& view() const { return view_; }

  const WorldEntry* find(const std::string& entry_id) const;
  // Log entry produced directly by the act at seq (create/modify/send/commit).
  const EffectEntry* effect_of(Seq act_seq) const;
  // Live entries sharing a subject, in entry-id order.
  std::vector<const WorldEntry*> live_by_subject(const std::string& subject) const;

  // Appends a raw entry and updates the view incrementally.
  void append(EffectEntry entry);

  friend bool operator==(const WorldState& a, const WorldState& b) {
    return a.log_ == b.log_ && a.view_ == b.view_;
  }

 private:
  std::vector<EffectEntry> log_;
  WorldView view_;
};

/// Subject key of an act: "<tool>:<item>" where item defaults to "main".
std::string act_subject(const ActPayload& act);

/// I-class: unchanged. R: create/modify entry. K: send entry. X: commit entry.
WorldState apply_effect(const WorldState& world, Seq act_seq, const ActPayload& act,
                        const ToolSpec& tool);

/// Exact undo of an R-class act's effect. by_seq is the event doing the undo.
WorldState invert(const WorldState& world, Seq act_seq, Seq by_seq = 0);

/// Appends the bound compensator's entry for a K-class act. Idempotent per act.
WorldState compensate(const WorldState& world, Seq act_seq, const ToolRegistry& registry,
                      Seq by_seq = 0);

/// Records that an X-class act's effect permanently violates the revision.
WorldState x_fallback(const WorldState& world, Seq act_seq, const Revision& rev, Seq by_seq = 0);

}  // namespace streamrev

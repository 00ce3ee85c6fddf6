#include "streamrev/world.hpp"

#include <algorithm>

namespace streamrev {

namespace {

constexpr std::pair<EffectKind, std::string_view> kEffectNames[] = {
    {EffectKind::Create, "create"},     {EffectKind::Modify, "modify"},
    {EffectKind::Send, "send"},         {EffectKind::Commit, "commit"},
    {EffectKind::Invert, "invert"},     {EffectKind::Compensate, "compensate"},
    {EffectKind::Fallback, "fallback"}};

bool is_primary_effect(EffectKind k) {
  return k == EffectKind::Create || k == EffectKind::Modify || k == EffectKind::Send ||
         k == EffectKind::Commit;
}

std::string subject_of(const std::string& entry_id) {
  return entry_id.substr(0, entry_id.find('@'));
}

void apply_to_view(WorldView& view, const EffectEntry& e) {
  switch (e.kind) {
    case EffectKind::Create:
    case EffectKind::Send:
    case EffectKind::Commit: {
      WorldEntry w;
      w.entry_id = e.entry_id;
      w.subject = subject_of(e.entry_id);
      w.tool = e.tool;
      w.cls = e.cls;
      w.is_public = e.is_public;
      w.source_seq = e.source_seq;
      w.content = e.content;
      w.effect_tags = e.effect_tags;
      if (e.kind == EffectKind::Create) {
        w.versions.push_back({e.source_seq, {e.content, e.effect_tags}});
      }
      view.entries[e.entry_id] = std::move(w);
      break;
    }
    case EffectKind::Modify: {
      WorldEntry& w = view.entries.at(e.entry_id);
      w.versions.push_back({e.source_seq, {e.content, e.effect_tags}});
      w.content = e.content;
      w.effect_tags = e.effect_tags;
      w.source_seq = e.source_seq;
      break;
    }
    case EffectKind::Invert: {
      auto it = view.entries.find(*e.ref_entry);
      if (it == view.entries.end()) break;
      auto& versions = it->second.versions;
      std::erase_if(versions, [&](const auto& v) { return v.first == *e.ref_seq; });
      if (versions.empty()) {
        view.entries.erase(it);
      } else {
        it->second.source_seq = versions.back().first;
        it->second.content = versions.back().second.first;
        it->second.effect_tags = versions.back().second.second;
      }
      break;
    }
    case EffectKind::Compensate: {
      if (auto it = view.entries.find(*e.ref_entry); it != view.entries.end()) {
        it->second.status = EntryStatus::Compensated;
        it->second.compensated_by = e.entry_id;
      }
      WorldEntry w;
      w.entry_id = e.entry_id;
      w.subject = subject_of(e.entry_id);
      w.tool = e.tool;
      w.cls = e.cls;
      w.is_public = e.is_public;
      w.source_seq = e.source_seq;
      w.content = e.content;
      w.effect_tags = e.effect_tags;
      view.entries[e.entry_id] = std::move(w);
      break;
    }
    case EffectKind::Fallback: {
      UnsatisfiableRecord r;
      r.action_seq = *e.ref_seq;
      if (auto it = e.content.find("revision"); it != e.content.end()) r.revision_ref = it->second;
      if (auto it = e.content.find("note"); it != e.content.end()) r.note = it->second;
      view.unsatisfiable.push_back(std::move(r));
      break;
    }
  }
}

}  // namespace

std::string_view to_string(EffectKind k) {
  for (const auto& [v, n] : kEffectNames) {
    if (v == k) return n;
  }
  return "?";
}

EffectKind parse_effect_kind(std::string_view s) {
  for (const auto& [v, n] : kEffectNames) {
    if (n == s) return v;
  }
  throw ValidationError("unknown effect kind '" + std::string(s) + "'");
}

std::string_view to_string(EntryStatus s) {
  return s == EntryStatus::Live ? "live" : "compensated";
}

WorldView fold_log(const std::vector<EffectEntry>& log) {
  WorldView view;
  for (const auto& e : log) apply_to_view(view, e);
  return view;
}

const WorldEntry* WorldState::find(const std::string& entry_id) const {
  auto it = view_.entries.find(entry_id);
  return it == view_.entries.end() ? nullptr : &it->second;
}

const EffectEntry* WorldState::effect_of(Seq act_seq) const {
  for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
    if (it->source_seq == act_seq && is_primary_effect(it->kind)) return &*it;
  }
  return nullptr;
}

std::vector<const WorldEntry*> WorldState::live_by_subject(const std::string& subject) const {
  std::vector<const WorldEntry*> out;
  for (const auto& [id, w] : view_.entries) {
    if (w.subject == subject && w.status == EntryStatus::Live) out.push_back(&w);
  }
  return out;
}

void WorldState::append(EffectEntry entry) {
  apply_to_view(view_, entry);
  log_.push_back(std::move(entry));
}

std::string act_subject(const ActPayload& act) {
  auto it = act.args.find("item");
  return act.tool + ":" + (it == act.args.end() ? std::string("main") : it->second);
}

WorldState apply_effect(const WorldState& world, Seq act_seq, const ActPayload& act,
                        const ToolSpec& tool) {
  if (tool.name != act.tool) {
    throw RegistryError("act tool '" + act.tool + "' does not match spec '" + tool.name + "'");
  }
  WorldState out = world;
  if (tool.cls == ReversibilityClass::I) return out;

  EffectEntry e;
  e.source_seq = act_seq;
  e.tool = tool.name;
  e.cls = tool.cls;
  e.is_public = tool.public_effect;
  e.content = act.args;
  e.effect_tags = act_effect_tags(act, tool);
  const std::string subject = act_subject(act);

  switch (tool.cls) {
    case ReversibilityClass::R:
      e.entry_id = subject;
      e.kind = world.find(subject) ? EffectKind::Modify : EffectKind::Create;
      break;
    case ReversibilityClass::K:
      e.entry_id = subject + "@" + std::to_string(act_seq);
      e.kind = EffectKind::Send;
      break;
    case ReversibilityClass::X:
      e.entry_id = subject + "@" + std::to_string(act_seq);
      e.kind = EffectKind::Commit;
      break;
    case ReversibilityClass::I:
      break;
  }
  out.append(std::move(e));
  return out;
}

WorldState invert(const WorldState& world, Seq act_seq, Seq by_seq) {
  const EffectEntry* effect = world.effect_of(act_seq);
  if (effect == nullptr || effect->cls != ReversibilityClass::R) {
    throw ClassError("act " + std::to_string(act_seq) + " has no R-class effect to invert");
  }
  for (const auto& e : world.log()) {
    if (e.kind == EffectKind::Invert && e.ref_seq == act_seq) {
      throw DoubleInvertError("act " + std::to_string(act_seq) + " already inverted");
    }
  }
  EffectEntry inv;
  inv.entry_id = effect->entry_id;
  inv.source_seq = by_seq;
  inv.kind = EffectKind::Invert;
  inv.tool = effect->tool;
  inv.cls = ReversibilityClass::R;
  inv.is_public = effect->is_public;
  inv.ref_seq = act_seq;
  inv.ref_entry = effect->entry_id;
  WorldState out = world;
  out.append(std::move(inv));
  return out;
}

WorldState compensate(const WorldState& world, Seq act_seq, const ToolRegistry& registry,
                      Seq by_seq) {
  const EffectEntry* effect = world.effect_of(act_seq);
  if (effect == nullptr || effect->cls != ReversibilityClass::K) {
    throw ClassError("act " + std::to_string(act_seq) + " has no K-class effect to compensate");
  }
  for (const auto& e : world.log()) {
    if (e.kind == EffectKind::Compensate && e.ref_seq == act_seq) return world;
  }
  const ToolSpec& original = registry.get(effect->tool);
  const ToolSpec& comp = registry.get(original.compensator.value());

  EffectEntry c;
  c.entry_id = comp.name + ":" + effect->entry_id + "@" + std::to_string(by_seq);
  c.source_seq = by_seq;
  c.kind = EffectKind::Compensate;
  c.tool = comp.name;
  c.cls = comp.cls;
  c.is_public = original.public_effect;
  c.ref_seq = act_seq;
  c.ref_entry = effect->entry_id;
  c.content["compensates"] = effect->entry_id;
  for (const char* key : {"recipients", "to"}) {
    if (auto it = effect->content.find(key); it != effect->content.end()) {
      c.content[key] = it->second;
    }
  }
  if (comp.name.find("cancel") != std::string::npos) {
    // Cancellation fee: 10% of the booked amount when known, flat otherwise.
    std::string fee = "50";
    if (auto it = effect->content.find("amount"); it != effect->content.end()) {
      try {
        fee = std::to_string(std::stol(it->second) / 10);
      } catch (const std::exception&) {
      }
    }
    c.content["fee"] = fee;
    c.content["note"] = "cancellation of " + effect->entry_id;
  } else {
    c.content["note"] = "correction superseding " + effect->entry_id;
  }
  WorldState out = world;
  out.append(std::move(c));
  return out;
}

WorldState x_fallback(const WorldState& world, Seq act_seq, const Revision& rev, Seq by_seq) {
  const EffectEntry* effect = world.effect_of(act_seq);
  if (effect == nullptr || effect->cls != ReversibilityClass::X) {
    throw ClassError("act " + std::to_string(act_seq) + " has no X-class effect");
  }
  EffectEntry f;
  f.entry_id = "fallback:" + effect->entry_id;
  f.source_seq = by_seq;
  f.kind = EffectKind::Fallback;
  f.tool = effect->tool;
  f.cls = ReversibilityClass::X;
  f.ref_seq = act_seq;
  f.ref_entry = effect->entry_id;
  f.content["revision"] = std::string(to_string(rev.rtype)) + ": " + rev.text;
  f.content["note"] = "irreversible effect " + effect->entry_id +
                      " cannot be undone; the revised specification is not fully satisfiable";
  WorldState out = world;
  out.append(std::move(f));
  return out;
}

}  // namespace streamrev

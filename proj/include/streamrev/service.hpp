#pragma once

// Live-session HTTP service. Sessions run on their own threads; clients
// follow them over server-sent events and inject revisions mid-run.
//
//   POST /sessions                     body: RunConfig fields  -> 201 handle
//   POST /sessions/{id}/inject         body: Revision, or {"rtype": ...} for the
//                                      scenario's bundled revision of that type
//   GET  /sessions/{id}/events?from_seq=N   text/event-stream
//   GET  /sessions/{id}                session state

#include <memory>
#include <string>

#include "json.hpp"
#include "streamrev/runtime.hpp"

namespace streamrev {

struct ServiceOptions {
  unsigned default_step_delay_ms = 250;  // mock pacing when the request names none
  std::string records_dir;               // finished RunRecords are written here if set
};

/// Turns trace events into stream frames. Non-act events inherit the phase
/// of the act they belong to; spec_version counts absorbed revisions that
/// changed the specification. Each frame embeds its event, so a stream
/// replayed from seq 1 reconstructs the trace.
class FrameBuilder {
 public:
  nlohmann::json operator()(const Event& e);

 private:
  unsigned spec_version_ = 0;
  Phase phase_ = Phase::Plan;
  bool replanned_ = false;
};

class Service {
 public:
  explicit Service(ServiceOptions opts = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop().
  void serve();
  /// Stops serving and cancels running sessions.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace streamrev

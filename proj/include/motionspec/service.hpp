#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "motionspec/image.hpp"
#include "motionspec/modal.hpp"
#include "motionspec/renderer.hpp"
#include "motionspec/spectral.hpp"

namespace motionspec {

using Logger = std::function<void(std::string_view)>;
/// Writes "warning: ..." lines to stderr.
Logger stderr_logger();

struct SessionConfig {
  SimConfig sim;
  double damping = kDefaultDamping;
  double mass = kDefaultModalMass;
  /// Scales the rendered displacement, not the simulation.
  double magnification = 1.0;
  int render_levels = 3;
  double beta = 1.0;

  void validate() const;
  /// Fields present in `json` override `base`; unknown keys are rejected.
  static SessionConfig from_json(std::string_view json, const SessionConfig& base);
  static SessionConfig from_json(std::string_view json);
  std::string to_json() const;
};

struct TickOutput {
  std::uint64_t tick = 0;
  double max_displacement = 0;
  std::vector<double> energy;
  /// Encoded frame; empty when the tick was not rendered.
  std::vector<std::uint8_t> png;

  /// "tick max_disp e_0 ... e_{K-1}"
  std::string telemetry() const;
};

using FrameCallback = std::function<void(std::shared_ptr<const TickOutput>)>;

/// One interactive simulation. Everything that mutates the modal state runs in
/// tick(); other threads only queue events and config changes.
class Session {
 public:
  Session(RgbImage image, SpectralVolume volume, SessionConfig config = {}, Logger log = stderr_logger());
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  int width() const noexcept { return image_.width(); }
  int height() const noexcept { return image_.height(); }
  int bands() const noexcept { return basis_.bands(); }

  /// Parses a wire record and queues it. Malformed or out-of-bounds records are
  /// dropped with a warning and return false.
  bool post_event(std::string_view record);
  bool post_event(const TimedForceEvent& ev);
  /// Applied at the start of the next tick.
  void post_config(const SessionConfig& config);
  SessionConfig config() const;

  /// Drains the inbox, advances one output frame and optionally renders it.
  TickOutput tick(bool render = true);

  /// Loop-thread view; do not call concurrently with tick().
  const ModalState& state() const noexcept { return state_; }
  FlowField displacement() const;

  /// Returns a token for unsubscribe. The callback runs on the tick thread and
  /// must not block; a null pointer means the session ended.
  std::uint64_t subscribe(FrameCallback callback);
  void unsubscribe(std::uint64_t token);
  std::size_t subscribers() const;

  /// Runs tick() at the configured frame rate on a private thread. Frames are
  /// only rendered while someone is subscribed.
  void start();
  void stop();
  bool running() const noexcept { return thread_.joinable(); }

 private:
  void apply_config(const SessionConfig& config);
  void run(std::stop_token stop);

  RgbImage image_;
  SpectralVolume basis_;
  SplatWeights weights_;
  Logger log_;

  // Owned by the tick loop.
  SessionConfig active_;
  OscillatorParams params_;
  ModalState state_;
  ForceSchedule forces_;
  std::uint64_t tick_ = 0;

  mutable std::mutex inbox_mutex_;
  std::vector<TimedForceEvent> inbox_;
  std::optional<SessionConfig> pending_config_;
  SessionConfig published_;

  mutable std::mutex subscriber_mutex_;
  std::map<std::uint64_t, FrameCallback> subscribers_;
  std::uint64_t next_token_ = 1;

  std::jthread thread_;
};

class SessionManager {
 public:
  explicit SessionManager(bool autostart = true, Logger log = stderr_logger());
  ~SessionManager();

  /// Throws DimensionMismatch when the image and volume disagree in size.
  std::string create(RgbImage image, SpectralVolume volume, const SessionConfig& config = {});
  std::string create(std::span<const std::uint8_t> png, std::span<const std::uint8_t> specvol,
                     std::string_view config_json = {});
  /// Throws NotFound.
  std::shared_ptr<Session> find(const std::string& id) const;
  /// Stops the session and notifies its subscribers. False if unknown.
  bool remove(const std::string& id);
  std::size_t size() const;
  std::vector<std::string> ids() const;

 private:
  std::string new_id();

  bool autostart_;
  Logger log_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_state_;
};

struct MultipartPart {
  std::string name;
  std::string filename;
  std::string content_type;
  std::string data;
};

/// multipart/form-data body; the boundary comes from the Content-Type header.
std::vector<MultipartPart> parse_multipart(std::string_view body, std::string_view content_type);

struct HttpResult {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// JSON body {"error": {"code": ..., "message": ...}}.
HttpResult error_result(int status, std::string_view code, std::string_view message);

/// Session control routes:
///   POST   /sessions                multipart: image, volume, config (optional)
///   DELETE /sessions/{id}
///   GET    /sessions/{id}/config
///   POST   /sessions/{id}/config    JSON patch
///   GET    /sessions
/// The stream route is upgraded by the server before reaching this.
HttpResult handle_request(SessionManager& sessions, std::string_view method, std::string_view target,
                          std::string_view content_type, std::string_view body);

/// Extracts {id} from /sessions/{id}/stream.
std::optional<std::string> stream_session_id(std::string_view target);

class Server {
 public:
  /// Port 0 picks a free port.
  Server(SessionManager& sessions, const std::string& bind, unsigned short port, int threads = 2);
  ~Server();

  unsigned short port() const noexcept;
  void start();
  /// Blocks until stop().
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace motionspec

#include "motionspec/service.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <iostream>
#include <random>
#include <sstream>

#include "motionspec/png_io.hpp"
#include "motionspec/texture_io.hpp"

namespace motionspec {

using json = nlohmann::json;

Logger stderr_logger() {
  return [](std::string_view message) { std::cerr << "warning: " << message << '\n'; };
}

void SessionConfig::validate() const {
  require(sim.frame_rate > 0 && std::isfinite(sim.frame_rate), ErrorCode::InvalidArgument,
          "frame_rate must be positive");
  require(sim.substeps >= 1, ErrorCode::InvalidArgument, "substeps must be >= 1");
  require(damping >= 0 && std::isfinite(damping), ErrorCode::InvalidArgument, "damping must be >= 0");
  require(mass > 0 && std::isfinite(mass), ErrorCode::InvalidArgument, "mass must be positive");
  require(std::isfinite(magnification), ErrorCode::InvalidArgument, "magnification must be finite");
  require(render_levels >= 1, ErrorCode::InvalidArgument, "render_levels must be >= 1");
  require(beta >= 0 && std::isfinite(beta), ErrorCode::InvalidArgument, "beta must be >= 0");
}

SessionConfig SessionConfig::from_json(std::string_view text, const SessionConfig& base) {
  SessionConfig c = base;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return c;
  try {
    const auto j = json::parse(text);
    require(j.is_object(), ErrorCode::InvalidArgument, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "frame_rate") c.sim.frame_rate = value.get<double>();
      else if (key == "substeps") c.sim.substeps = value.get<int>();
      else if (key == "damping") c.damping = value.get<double>();
      else if (key == "mass") c.mass = value.get<double>();
      else if (key == "magnification") c.magnification = value.get<double>();
      else if (key == "render_levels") c.render_levels = value.get<int>();
      else if (key == "beta") c.beta = value.get<double>();
      else throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

SessionConfig SessionConfig::from_json(std::string_view text) { return from_json(text, SessionConfig{}); }

std::string SessionConfig::to_json() const {
  return json{{"frame_rate", sim.frame_rate}, {"substeps", sim.substeps},       {"damping", damping},
              {"mass", mass},                 {"magnification", magnification}, {"render_levels", render_levels},
              {"beta", beta}}
      .dump();
}

std::string TickOutput::telemetry() const {
  std::ostringstream out;
  out << tick << ' ' << max_displacement;
  for (const double e : energy) out << ' ' << e;
  return out.str();
}

namespace {

SplatWeights weights_for(const SpectralVolume& vol) { return compute_weights(ifft_inverse(vol)); }

std::vector<TimedForceEvent> by_time(std::vector<TimedForceEvent> events) {
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return events;
}

}  // namespace

Session::Session(RgbImage image, SpectralVolume volume, SessionConfig config, Logger log)
    : image_(std::move(image)),
      basis_((require(image_.width() == volume.width() && image_.height() == volume.height(),
                      ErrorCode::DimensionMismatch,
                      "image is " + std::to_string(image_.width()) + "x" + std::to_string(image_.height()) +
                          " but volume is " + std::to_string(volume.width()) + "x" +
                          std::to_string(volume.height())),
              modal_basis(volume))),
      weights_(weights_for(volume)),
      log_(log ? std::move(log) : stderr_logger()),
      active_((config.validate(), config)),
      params_(OscillatorParams::from_volume(volume, config.damping, config.mass)),
      state_(volume.bands(), config.sim.dt(), params_),
      published_(config) {}

Session::~Session() { stop(); }

bool Session::post_event(std::string_view record) {
  const auto ev = parse_force_record(record);
  if (!ev) {
    log_("ignoring malformed event: " + std::string(record));
    return false;
  }
  return post_event(*ev);
}

bool Session::post_event(const TimedForceEvent& ev) {
  if (ev.event.x < 0 || ev.event.x >= width() || ev.event.y < 0 || ev.event.y >= height()) {
    log_("ignoring out-of-bounds event: " + format_force_record(ev));
    return false;
  }
  std::lock_guard lock(inbox_mutex_);
  inbox_.push_back(ev);
  return true;
}

void Session::post_config(const SessionConfig& config) {
  config.validate();
  std::lock_guard lock(inbox_mutex_);
  pending_config_ = config;
  published_ = config;
}

SessionConfig Session::config() const {
  std::lock_guard lock(inbox_mutex_);
  return published_;
}

void Session::apply_config(const SessionConfig& config) {
  OscillatorParams params = params_;
  params.damping = config.damping;
  params.mass = config.mass;
  if (config.sim.dt() != state_.dt()) {
    ModalState next(state_.bands(), config.sim.dt(), params);
    std::copy(state_.q().begin(), state_.q().end(), next.q().begin());
    std::copy(state_.q_dot().begin(), state_.q_dot().end(), next.q_dot().begin());
    state_ = next;
  }
  params_ = params;
  active_ = config;
}

TickOutput Session::tick(bool render) {
  std::vector<TimedForceEvent> events;
  std::optional<SessionConfig> config;
  {
    std::lock_guard lock(inbox_mutex_);
    events.swap(inbox_);
    config.swap(pending_config_);
  }
  if (config) {
    try {
      apply_config(*config);
    } catch (const Error& e) {
      log_(std::string("rejected config: ") + e.what());
    }
  }
  for (const auto& ev : by_time(std::move(events))) forces_.apply(ev, basis_, state_, params_);
  for (int s = 0; s < active_.sim.substeps; ++s) step(state_, params_, forces_.drive());

  TickOutput out;
  out.tick = ++tick_;
  out.energy = state_.band_energy(params_);
  const auto field = displacement();
  for (const auto& d : field.data()) out.max_displacement = std::max(out.max_displacement, std::hypot(d.dx, d.dy));
  if (render) {
    RenderConfig rc;
    rc.levels = active_.render_levels;
    rc.beta = active_.beta;
    out.png = encode_png(synthesize_frame(image_, field, weights_, rc));
  }
  return out;
}

FlowField Session::displacement() const {
  auto field = displacement_field(basis_, state_);
  if (active_.magnification != 1.0) {
    for (auto& d : field.data()) {
      d.dx *= active_.magnification;
      d.dy *= active_.magnification;
    }
  }
  return field;
}

std::uint64_t Session::subscribe(FrameCallback callback) {
  std::lock_guard lock(subscriber_mutex_);
  const auto token = next_token_++;
  subscribers_.emplace(token, std::move(callback));
  return token;
}

void Session::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(subscriber_mutex_);
  subscribers_.erase(token);
}

std::size_t Session::subscribers() const {
  std::lock_guard lock(subscriber_mutex_);
  return subscribers_.size();
}

void Session::start() {
  if (thread_.joinable()) return;
  thread_ = std::jthread([this](std::stop_token stop) { run(stop); });
}

void Session::stop() {
  if (thread_.joinable()) {
    thread_.request_stop();
    thread_.join();
    thread_ = std::jthread();
  }
  std::map<std::uint64_t, FrameCallback> subs;
  {
    std::lock_guard lock(subscriber_mutex_);
    subs.swap(subscribers_);
  }
  for (auto& [token, cb] : subs) cb(nullptr);
}

void Session::run(std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  std::mutex m;
  std::condition_variable_any cv;
  auto next = clock::now();
  while (!stop.stop_requested()) {
    std::vector<FrameCallback> targets;
    {
      std::lock_guard lock(subscriber_mutex_);
      for (const auto& [token, cb] : subscribers_) targets.push_back(cb);
    }
    try {
      auto out = std::make_shared<const TickOutput>(tick(!targets.empty()));
      for (const auto& cb : targets) cb(out);
    } catch (const std::exception& e) {
      log_(std::string("tick failed: ") + e.what());
    }
    const auto interval = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(1.0 / active_.sim.frame_rate));
    next += interval;
    // A slow tick drops the frames it overran instead of bursting to catch up.
    if (next < clock::now()) next = clock::now();
    std::unique_lock lock(m);
    cv.wait_until(lock, stop, next, [] { return false; });
  }
}

SessionManager::SessionManager(bool autostart, Logger log)
    : autostart_(autostart), log_(log ? std::move(log) : stderr_logger()), id_state_(std::random_device{}()) {}

SessionManager::~SessionManager() {
  std::map<std::string, std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& [id, s] : sessions) s->stop();
}

std::string SessionManager::new_id() {
  // splitmix64
  std::uint64_t z = (id_state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(z));
  return buf;
}

std::string SessionManager::create(RgbImage image, SpectralVolume volume, const SessionConfig& config) {
  auto session = std::make_shared<Session>(std::move(image), std::move(volume), config, log_);
  std::string id;
  {
    std::lock_guard lock(mutex_);
    do id = new_id();
    while (sessions_.count(id) != 0);
    sessions_.emplace(id, session);
  }
  if (autostart_) session->start();
  return id;
}

std::string SessionManager::create(std::span<const std::uint8_t> png, std::span<const std::uint8_t> specvol,
                                   std::string_view config_json) {
  auto image = decode_png(png);
  std::istringstream in(std::string(reinterpret_cast<const char*>(specvol.data()), specvol.size()));
  auto volume = read_spectral_volume(in);
  return create(std::move(image), std::move(volume), SessionConfig::from_json(config_json));
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  require(it != sessions_.end(), ErrorCode::NotFound, "no session " + id);
  return it->second;
}

bool SessionManager::remove(const std::string& id) {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    session = std::move(it->second);
    sessions_.erase(it);
  }
  session->stop();
  return true;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

// key=value or key="value" out of a header's ";"-separated parameters.
std::optional<std::string> header_param(std::string_view header, std::string_view key) {
  std::size_t pos = header.find(';');
  while (pos != std::string_view::npos) {
    const auto next = header.find(';', pos + 1);
    const auto item = trim(header.substr(pos + 1, next == std::string_view::npos ? next : next - pos - 1));
    const auto eq = item.find('=');
    if (eq != std::string_view::npos && iequals(trim(item.substr(0, eq)), key)) {
      auto value = trim(item.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      return std::string(value);
    }
    pos = next;
  }
  return std::nullopt;
}

}  // namespace

std::vector<MultipartPart> parse_multipart(std::string_view body, std::string_view content_type) {
  require(iequals(trim(content_type.substr(0, content_type.find(';'))), "multipart/form-data"),
          ErrorCode::InvalidArgument, "expected multipart/form-data");
  const auto boundary = header_param(content_type, "boundary");
  require(boundary && !boundary->empty(), ErrorCode::InvalidArgument, "multipart boundary missing");
  const std::string delim = "--" + *boundary;

  std::vector<MultipartPart> parts;
  auto pos = body.find(delim);
  require(pos != std::string_view::npos, ErrorCode::DataError, "multipart body has no parts");
  while (true) {
    pos += delim.size();
    if (body.substr(pos, 2) == "--") break;
    require(body.substr(pos, 2) == "\r\n", ErrorCode::DataError, "malformed multipart delimiter");
    pos += 2;
    const auto header_end = body.find("\r\n\r\n", pos);
    require(header_end != std::string_view::npos, ErrorCode::DataError, "unterminated multipart headers");
    MultipartPart part;
    for (auto line_start = pos; line_start < header_end;) {
      auto line_end = body.find("\r\n", line_start);
      if (line_end > header_end) line_end = header_end;
      const auto line = body.substr(line_start, line_end - line_start);
      const auto colon = line.find(':');
      if (colon != std::string_view::npos) {
        const auto name = trim(line.substr(0, colon));
        const auto value = trim(line.substr(colon + 1));
        if (iequals(name, "Content-Disposition")) {
          part.name = header_param(value, "name").value_or("");
          part.filename = header_param(value, "filename").value_or("");
        } else if (iequals(name, "Content-Type")) {
          part.content_type = std::string(value);
        }
      }
      line_start = line_end + 2;
    }
    const auto data_start = header_end + 4;
    const auto data_end = body.find("\r\n" + delim, data_start);
    require(data_end != std::string_view::npos, ErrorCode::DataError, "unterminated multipart part");
    part.data = std::string(body.substr(data_start, data_end - data_start));
    parts.push_back(std::move(part));
    pos = data_end + 2;
  }
  return parts;
}

HttpResult error_result(int status, std::string_view code, std::string_view message) {
  return {status, "application/json",
          json{{"error", {{"code", std::string(code)}, {"message", std::string(message)}}}}.dump()};
}

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

std::vector<std::string_view> split_path(std::string_view target) {
  target = target.substr(0, target.find('?'));
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < target.size()) {
    if (target[pos] == '/') {
      ++pos;
      continue;
    }
    const auto end = std::min(target.find('/', pos), target.size());
    out.push_back(target.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::span<const std::uint8_t> bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

HttpResult create_session(SessionManager& sessions, std::string_view content_type, std::string_view body) {
  const auto parts = parse_multipart(body, content_type);
  const MultipartPart* image = nullptr;
  const MultipartPart* volume = nullptr;
  const MultipartPart* config = nullptr;
  for (const auto& p : parts) {
    if (p.name == "image") image = &p;
    else if (p.name == "volume" || p.name == "specvol") volume = &p;
    else if (p.name == "config") config = &p;
  }
  require(image != nullptr, ErrorCode::InvalidArgument, "missing multipart field 'image'");
  require(volume != nullptr, ErrorCode::InvalidArgument, "missing multipart field 'volume'");
  const auto id = sessions.create(bytes(image->data), bytes(volume->data),
                                  config != nullptr ? std::string_view(config->data) : std::string_view());
  const auto s = sessions.find(id);
  return {201, "application/json",
          json{{"id", id},
               {"width", s->width()},
               {"height", s->height()},
               {"bands", s->bands()},
               {"config", json::parse(s->config().to_json())}}
              .dump()};
}

}  // namespace

HttpResult handle_request(SessionManager& sessions, std::string_view method, std::string_view target,
                          std::string_view content_type, std::string_view body) {
  try {
    const auto path = split_path(target);
    if (path.empty() || path[0] != "sessions") return error_result(404, "NOT_FOUND", "no such route");
    if (path.size() == 1) {
      if (method == "POST") return create_session(sessions, content_type, body);
      if (method == "GET") return {200, "application/json", json{{"sessions", sessions.ids()}}.dump()};
      return error_result(405, "METHOD_NOT_ALLOWED", "use GET or POST");
    }
    const std::string id(path[1]);
    if (path.size() == 2) {
      if (method != "DELETE") return error_result(405, "METHOD_NOT_ALLOWED", "use DELETE");
      if (!sessions.remove(id)) return error_result(404, "NOT_FOUND", "no session " + id);
      return {200, "application/json", json{{"deleted", id}}.dump()};
    }
    if (path.size() == 3 && path[2] == "config") {
      const auto s = sessions.find(id);
      if (method == "POST") s->post_config(SessionConfig::from_json(body, s->config()));
      else if (method != "GET") return error_result(405, "METHOD_NOT_ALLOWED", "use GET or POST");
      return {200, "application/json", s->config().to_json()};
    }
    if (path.size() == 3 && path[2] == "stream") {
      sessions.find(id);
      return error_result(426, "UPGRADE_REQUIRED", "stream requires a WebSocket upgrade");
    }
    return error_result(404, "NOT_FOUND", "no such route");
  } catch (const Error& e) {
    return error_result(status_for(e.code()), to_string(e.code()), e.what());
  }
}

std::optional<std::string> stream_session_id(std::string_view target) {
  const auto path = split_path(target);
  if (path.size() == 3 && path[0] == "sessions" && path[2] == "stream") return std::string(path[1]);
  return std::nullopt;
}

}  // namespace motionspec

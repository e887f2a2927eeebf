#include "motionspec/modal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace motionspec {

double OscillatorParams::max_omega() const {
  return omega.empty() ? 0.0 : *std::max_element(omega.begin(), omega.end());
}

void OscillatorParams::validate() const {
  require(!omega.empty(), ErrorCode::InvalidArgument, "oscillator needs at least one band");
  for (const double w : omega) {
    require(w > 0 && std::isfinite(w), ErrorCode::InvalidArgument, "oscillator frequencies must be positive");
  }
  require(damping >= 0 && std::isfinite(damping), ErrorCode::InvalidArgument, "damping ratio must be >= 0");
  require(mass > 0 && std::isfinite(mass), ErrorCode::InvalidArgument, "modal mass must be positive");
}

OscillatorParams OscillatorParams::from_volume(const SpectralVolume& vol, double damping, double mass) {
  OscillatorParams p;
  p.damping = damping;
  p.mass = mass;
  for (const double f : vol.frequencies()) p.omega.push_back(2.0 * std::numbers::pi * f);
  p.validate();
  return p;
}

ModalState::ModalState(int bands, double dt, const OscillatorParams& params)
    : q_(static_cast<std::size_t>(bands)), q_dot_(static_cast<std::size_t>(bands)), dt_(dt) {
  params.validate();
  require(bands == params.bands(), ErrorCode::DimensionMismatch, "state and oscillator band counts differ");
  require(dt > 0 && dt < 2.0 / params.max_omega(), ErrorCode::InvalidArgument,
          "dt must satisfy 0 < dt < 2 / omega_max");
}

std::vector<double> ModalState::band_energy(const OscillatorParams& params) const {
  std::vector<double> e(q_.size());
  for (std::size_t j = 0; j < q_.size(); ++j) {
    const double w = params.omega[j];
    e[j] = 0.5 * params.mass * (std::norm(q_dot_[j]) + w * w * std::norm(q_[j]));
  }
  return e;
}

std::string_view to_string(ForceKind kind) {
  switch (kind) {
    case ForceKind::Impulse: return "impulse";
    case ForceKind::Sustained: return "sustained";
    case ForceKind::Release: return "release";
  }
  return "impulse";
}

std::optional<ForceKind> parse_force_kind(std::string_view text) {
  if (text == "impulse") return ForceKind::Impulse;
  if (text == "sustained") return ForceKind::Sustained;
  if (text == "release") return ForceKind::Release;
  return std::nullopt;
}

std::optional<TimedForceEvent> parse_force_record(std::string_view line) {
  std::istringstream in{std::string(line)};
  double t_ms = 0;
  std::string kind;
  TimedForceEvent ev;
  if (!(in >> t_ms >> kind >> ev.event.x >> ev.event.y >> ev.event.fx >> ev.event.fy)) return std::nullopt;
  std::string trailing;
  if (in >> trailing) return std::nullopt;
  const auto k = parse_force_kind(kind);
  if (!k || !std::isfinite(t_ms) || t_ms < 0 || !std::isfinite(ev.event.fx) || !std::isfinite(ev.event.fy)) {
    return std::nullopt;
  }
  ev.event.kind = *k;
  ev.time = t_ms / 1000.0;
  return ev;
}

std::string format_force_record(const TimedForceEvent& ev) {
  std::ostringstream out;
  out << std::llround(ev.time * 1000.0) << ' ' << to_string(ev.event.kind) << ' ' << ev.event.x << ' '
      << ev.event.y << ' ' << ev.event.fx << ' ' << ev.event.fy;
  return out.str();
}

std::vector<Complex> project_force(const SpectralVolume& vol, const ForceEvent& ev) {
  require(ev.x >= 0 && ev.x < vol.width() && ev.y >= 0 && ev.y < vol.height(), ErrorCode::InvalidArgument,
          "force pixel out of bounds");
  require(std::isfinite(ev.fx) && std::isfinite(ev.fy), ErrorCode::InvalidArgument, "force must be finite");
  std::vector<Complex> f(static_cast<std::size_t>(vol.bands()));
  for (int j = 0; j < vol.bands(); ++j) {
    const auto& s = vol.at(j, ev.x, ev.y);
    f[j] = std::conj(s.sx) * ev.fx + std::conj(s.sy) * ev.fy;
  }
  return f;
}

void step(ModalState& state, const OscillatorParams& params, std::span<const Complex> modal_force) {
  const double dt = state.dt();
  const double inv_m = 1.0 / params.mass;
  auto q = state.q();
  auto v = state.q_dot();
  for (int j = 0; j < state.bands(); ++j) {
    const double w = params.omega[j];
    const Complex f = modal_force.empty() ? Complex{} : modal_force[j];
    const Complex accel = f * inv_m - 2.0 * params.damping * w * v[j] - w * w * q[j];
    v[j] += dt * accel;
    q[j] += dt * v[j];
  }
  state.advance_time();
}

void apply_impulse(ModalState& state, const OscillatorParams& params, std::span<const Complex> modal_force) {
  require(static_cast<int>(modal_force.size()) == state.bands(), ErrorCode::DimensionMismatch,
          "impulse band count differs from state");
  auto v = state.q_dot();
  for (int j = 0; j < state.bands(); ++j) v[j] += modal_force[j] / params.mass;
}

FlowField displacement_field(const SpectralVolume& vol, const ModalState& state) {
  require(vol.bands() == state.bands(), ErrorCode::DimensionMismatch, "volume and state band counts differ");
  FlowField out(vol.width(), vol.height());
  auto dst = out.data();
  for (int j = 0; j < vol.bands(); ++j) {
    const Complex q = state.q()[j];
    if (q == Complex{}) continue;
    const auto band = vol.band(j);
    for (std::size_t p = 0; p < band.size(); ++p) {
      dst[p].dx += (band[p].sx * q).real();
      dst[p].dy += (band[p].sy * q).real();
    }
  }
  return out;
}

SpectralVolume modal_basis(const SpectralVolume& vol) {
  SpectralVolume out = vol;
  out.clear_mean();
  const double scale = 2.0 / vol.frames();
  for (auto& c : out.data()) {
    c.sx *= scale;
    c.sy *= scale;
  }
  return out;
}

void ForceSchedule::apply(const TimedForceEvent& ev, const SpectralVolume& vol, ModalState& state,
                          const OscillatorParams& params) {
  switch (ev.event.kind) {
    case ForceKind::Impulse:
      apply_impulse(state, params, project_force(vol, ev.event));
      break;
    case ForceKind::Sustained:
      drive_ = project_force(vol, ev.event);
      break;
    case ForceKind::Release:
      drive_.clear();
      break;
  }
}

std::vector<FlowField> simulate(const SpectralVolume& vol, const OscillatorParams& params,
                                std::span<const TimedForceEvent> schedule, double duration,
                                const SimConfig& config) {
  require(duration >= 0, ErrorCode::InvalidArgument, "duration must be non-negative");
  require(config.frame_rate > 0 && config.substeps >= 1, ErrorCode::InvalidArgument, "invalid sim config");
  for (const auto& ev : schedule) {
    require(ev.time >= 0 && ev.time <= duration, ErrorCode::InvalidArgument, "event time outside duration");
  }
  std::vector<TimedForceEvent> events(schedule.begin(), schedule.end());
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });

  ModalState state(vol.bands(), config.dt(), params);
  ForceSchedule forces;
  const auto frames = static_cast<int>(std::floor(duration * config.frame_rate + 1e-9));
  std::vector<FlowField> out;
  out.reserve(static_cast<std::size_t>(frames));
  std::size_t next = 0;
  for (int frame = 0; frame < frames; ++frame) {
    for (int s = 0; s < config.substeps; ++s) {
      while (next < events.size() && events[next].time <= state.time() + 0.5 * state.dt()) {
        forces.apply(events[next++], vol, state, params);
      }
      step(state, params, forces.drive());
    }
    out.push_back(displacement_field(vol, state));
  }
  return out;
}

}  // namespace motionspec

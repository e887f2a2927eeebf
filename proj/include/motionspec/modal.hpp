#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motionspec/spectral.hpp"

namespace motionspec {

inline constexpr double kDefaultDamping = 0.05;
inline constexpr double kDefaultModalMass = 1.0;

using Complex = std::complex<double>;

/// Per-band damped oscillator constants.
struct OscillatorParams {
  std::vector<double> omega;  // rad/s
  double damping = kDefaultDamping;
  double mass = kDefaultModalMass;

  int bands() const noexcept { return static_cast<int>(omega.size()); }
  double max_omega() const;
  void validate() const;

  /// omega_j = 2*pi*f_j from the volume's band frequencies.
  static OscillatorParams from_volume(const SpectralVolume& vol, double damping = kDefaultDamping,
                                      double mass = kDefaultModalMass);
};

/// Complex modal coordinates and velocities, one per band.
class ModalState {
 public:
  /// Throws unless dt < 2 / omega_max.
  ModalState(int bands, double dt, const OscillatorParams& params);

  int bands() const noexcept { return static_cast<int>(q_.size()); }
  double dt() const noexcept { return dt_; }
  double time() const noexcept { return time_; }

  std::span<Complex> q() noexcept { return q_; }
  std::span<const Complex> q() const noexcept { return q_; }
  std::span<Complex> q_dot() noexcept { return q_dot_; }
  std::span<const Complex> q_dot() const noexcept { return q_dot_; }

  void advance_time() { time_ += dt_; }

  /// E_j = m/2 |q_dot|^2 + m/2 omega^2 |q|^2.
  std::vector<double> band_energy(const OscillatorParams& params) const;

  bool operator==(const ModalState&) const = default;

 private:
  std::vector<Complex> q_;
  std::vector<Complex> q_dot_;
  double time_ = 0;
  double dt_ = 0;
};

enum class ForceKind { Impulse, Sustained, Release };

std::string_view to_string(ForceKind kind);
std::optional<ForceKind> parse_force_kind(std::string_view text);

struct ForceEvent {
  int x = 0;
  int y = 0;
  double fx = 0;
  double fy = 0;
  ForceKind kind = ForceKind::Impulse;
};

struct TimedForceEvent {
  double time = 0;  // seconds
  ForceEvent event;
};

/// Wire record "t_ms kind x y fx fy". Returns nullopt on malformed input.
std::optional<TimedForceEvent> parse_force_record(std::string_view line);
std::string format_force_record(const TimedForceEvent& ev);

/// Per band: conj(S_x(p)) fx + conj(S_y(p)) fy.
std::vector<Complex> project_force(const SpectralVolume& vol, const ForceEvent& ev);

/// Semi-implicit Euler: velocity first, then position with the new velocity.
/// `modal_force` may be empty (no drive).
void step(ModalState& state, const OscillatorParams& params, std::span<const Complex> modal_force);

/// Applies an impulse: q_dot += f / m.
void apply_impulse(ModalState& state, const OscillatorParams& params, std::span<const Complex> modal_force);

/// F(p) = sum_j Re(S_j(p) q_j) per axis.
FlowField displacement_field(const SpectralVolume& vol, const ModalState& state);

/// Rescales coefficients by 2/T so a unit modal coordinate reproduces the
/// band's trajectory amplitude in pixels. The mean plane is dropped.
SpectralVolume modal_basis(const SpectralVolume& vol);

struct SimConfig {
  double frame_rate = 25.0;
  /// Integration steps per output frame.
  int substeps = 8;

  double dt() const { return 1.0 / (frame_rate * substeps); }
};

/// Tracks the drive currently held by a sustained event.
class ForceSchedule {
 public:
  /// Applies `ev` to the state or the held drive.
  void apply(const TimedForceEvent& ev, const SpectralVolume& vol, ModalState& state,
             const OscillatorParams& params);
  std::span<const Complex> drive() const noexcept { return drive_; }
  bool holding() const noexcept { return !drive_.empty(); }

 private:
  std::vector<Complex> drive_;
};

/// Runs from a zero state for `duration` seconds and emits one field per
/// output frame. Events fire at the first step whose start time is >= their time.
std::vector<FlowField> simulate(const SpectralVolume& vol, const OscillatorParams& params,
                                std::span<const TimedForceEvent> schedule, double duration,
                                const SimConfig& config = {});

}  // namespace motionspec

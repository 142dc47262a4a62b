#pragma once

#include <span>

#include "mlc/belief_grid.hpp"
#include "mlc/types.hpp"
#include "mlc/wildfire.hpp"

namespace mlc {

enum class MotionMode { RandomTargets, ExploreOnly, FireTracking };

MotionMode parse_motion_mode(const std::string& s);
std::string to_string(MotionMode m);

struct MotionConfig {
  double speed = 20.0;        // v_0, m/s
  double repel_gain = 1e8;    // w_r
  double age_gain = 1.0;      // w_a
  double fire_gain = 5000.0;  // w_f
  MotionMode mode = MotionMode::FireTracking;
  // Cells per side of the blocks the belief fields are summed over; 1 is exact.
  int force_stride = 1;

  void validate() const;
};

/// Axis-aligned environment rectangle [0, width] x [0, height].
struct EnvBounds {
  double width = 0.0;
  double height = 0.0;

  Vec3 center() const { return {width / 2, height / 2, 0.0}; }
  Vec3 clamp(const Vec3& p) const;
  bool contains(const Vec3& p, double slack = 0.0) const;
};

/// Reciprocal repulsion from other agents plus one virtual agent at the
/// nearest point of each of the four walls.
Vec3 force_repel(const Vec3& self, std::span<const Vec3> others, const EnvBounds& env, double gain);
/// Attraction towards old data; unobserved cells count with `unobserved_age`.
Vec3 force_age(const Vec3& self, const BeliefGrid& belief, double now, double unobserved_age, double gain,
               int stride = 1);
/// Attraction towards believed fire, inverse-distance falloff.
Vec3 force_fire(const Vec3& self, const BeliefGrid& belief, double gain, int stride = 1);

/// Age and fire fields together; a zero gain drops that field.
Vec3 force_belief(const Vec3& self, const BeliefGrid& belief, double now, double unobserved_age, double age_gain,
                  double fire_gain, int stride = 1);

/// Constant-speed heading along `force`, or the previous heading for a null force.
Vec3 step_velocity(const Vec3& force, const Vec3& previous, double speed);

/// True once the remaining battery only just covers the flight back (plus one tick).
bool must_return(double battery, const Vec3& position, const Vec3& base, double speed, double dt);

Vec3 random_target(const EnvBounds& env, Rng& rng);
/// Pursuit of `target` at `speed`; draws a fresh target on arrival.
Vec3 step_random_targets(Vec3& target, const Vec3& position, const EnvBounds& env, Rng& rng, double speed, double dt);

}  // namespace mlc

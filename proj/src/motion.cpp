#include "mlc/motion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mlc {

namespace {

constexpr double kNullForce = 1e-12;

template <typename Weight>
Vec3 field_sum(const Vec3& self, const BeliefGrid& belief, int stride, double exponent, Weight weight) {
  const GridShape& s = belief.shape();
  const double cs = s.cell_size;
  double fx = 0.0;
  double fy = 0.0;
  for (int by = 0; by < s.height; by += stride) {
    const int ey = std::min(s.height, by + stride);
    for (int bx = 0; bx < s.width; bx += stride) {
      const int ex = std::min(s.width, bx + stride);
      double w = 0.0;
      for (int y = by; y < ey; ++y) {
        for (int x = bx; x < ex; ++x) w += weight(belief.at(x, y));
      }
      if (w == 0.0) continue;
      const double dx = (bx + ex) * 0.5 * cs - self.x;
      const double dy = (by + ey) * 0.5 * cs - self.y;
      const double d2 = dx * dx + dy * dy;
      const double denom = (exponent == 3.0 ? d2 * std::sqrt(d2) : d2) + 1.0;
      fx += w * dx / denom;
      fy += w * dy / denom;
    }
  }
  return {fx, fy, 0.0};
}

// Age field over every cell, fire field over cells with fire only. Age partial
// sums are kept per lane so the loop vectorizes; the order is fixed and
// contraction is off for this file, so the AVX2 clone gives the same bits.
__attribute__((target_clones("avx2", "default"))) Vec3 belief_fields(const Vec3& self, const BeliefGrid& belief,
                                                                     double now, double unobserved_age,
                                                                     double age_gain, double fire_gain) {
  constexpr int kLanes = 4;
  const GridShape& s = belief.shape();
  const auto cells = belief.cells();
  const double cs = s.cell_size;
  std::vector<double> dxs(static_cast<std::size_t>(s.width));
  for (int x = 0; x < s.width; ++x) dxs[static_cast<std::size_t>(x)] = (x + 0.5) * cs - self.x;

  std::vector<double> ages(dxs.size());
  double ax[kLanes] = {}, ay[kLanes] = {};
  double fx = 0.0, fy = 0.0;
  for (int y = 0; y < s.height; ++y) {
    const double dy = (y + 0.5) * cs - self.y;
    const double dy2 = dy * dy;
    const MetaCell* row = cells.data() + static_cast<std::size_t>(y) * s.width;
    for (std::size_t x = 0; x < dxs.size(); ++x) {
      const bool seen = row[x].obs_time != kNever;
      ages[x] = seen ? now - row[x].obs_time : unobserved_age;
    }
    auto cell = [&](std::size_t x, int l) {
      const double dx = dxs[x];
      const double d2 = dx * dx + dy2;
      const double ka = ages[x] / (d2 * std::sqrt(d2) + 1.0);
      ax[l] += ka * dx;
      ay[l] += ka * dy;
    };
    const std::size_t full = dxs.size() - dxs.size() % kLanes;
    for (std::size_t x0 = 0; x0 < full; x0 += kLanes) {
      for (int l = 0; l < kLanes; ++l) cell(x0 + l, l);
    }
    for (std::size_t x = full; x < dxs.size(); ++x) cell(x, static_cast<int>(x - full));
    if (fire_gain == 0.0) continue;
    for (std::size_t x = 0; x < dxs.size(); ++x) {
      if (row[x].obs_time == kNever || row[x].fire == 0.0) continue;
      const double dx = dxs[x];
      const double kf = row[x].fire / (dx * dx + dy2 + 1.0);
      fx += kf * dx;
      fy += kf * dy;
    }
  }
  double sax = 0.0, say = 0.0;
  for (int l = 0; l < kLanes; ++l) {
    sax += ax[l];
    say += ay[l];
  }
  return Vec3{sax, say, 0.0} * age_gain + Vec3{fx, fy, 0.0} * fire_gain;
}

}  // namespace

Vec3 force_belief(const Vec3& self, const BeliefGrid& belief, double now, double unobserved_age, double age_gain,
                  double fire_gain, int stride) {
  if (stride == 1) return belief_fields(self, belief, now, unobserved_age, age_gain, fire_gain);
  return force_age(self, belief, now, unobserved_age, age_gain, stride) + force_fire(self, belief, fire_gain, stride);
}

MotionMode parse_motion_mode(const std::string& s) {
  if (s == "random") return MotionMode::RandomTargets;
  if (s == "explore") return MotionMode::ExploreOnly;
  if (s == "track") return MotionMode::FireTracking;
  throw ConfigError("unknown motion mode '" + s + "' (expected random, explore or track)");
}

std::string to_string(MotionMode m) {
  switch (m) {
    case MotionMode::RandomTargets: return "random";
    case MotionMode::ExploreOnly: return "explore";
    case MotionMode::FireTracking: return "track";
  }
  return "?";
}

void MotionConfig::validate() const {
  if (!(speed > 0.0)) throw ConfigError("motion speed must be positive");
  if (!(repel_gain >= 0.0 && age_gain >= 0.0 && fire_gain >= 0.0)) throw ConfigError("motion gains must be >= 0");
  if (force_stride < 1) throw ConfigError("force_stride must be >= 1");
}

Vec3 EnvBounds::clamp(const Vec3& p) const {
  return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height), p.z};
}

bool EnvBounds::contains(const Vec3& p, double slack) const {
  return p.x >= -slack && p.y >= -slack && p.x <= width + slack && p.y <= height + slack;
}

Vec3 force_repel(const Vec3& self, std::span<const Vec3> others, const EnvBounds& env, double gain) {
  Vec3 f;
  auto push = [&](const Vec3& from) {
    const Vec3 d = self - from;
    const double n = d.norm();
    f += d * (1.0 / (n * n * n + 1.0));
  };
  for (const Vec3& o : others) push(o);
  push({0.0, self.y, self.z});
  push({env.width, self.y, self.z});
  push({self.x, 0.0, self.z});
  push({self.x, env.height, self.z});
  return f * gain;
}

Vec3 force_age(const Vec3& self, const BeliefGrid& belief, double now, double unobserved_age, double gain,
               int stride) {
  const Vec3 f = field_sum(self, belief, stride, 3.0, [&](const MetaCell& c) {
    return c.observed() ? c.age(now) : unobserved_age;
  });
  return f * gain;
}

Vec3 force_fire(const Vec3& self, const BeliefGrid& belief, double gain, int stride) {
  const Vec3 f = field_sum(self, belief, stride, 2.0, [](const MetaCell& c) { return c.observed() ? c.fire : 0.0; });
  return f * gain;
}

Vec3 step_velocity(const Vec3& force, const Vec3& previous, double speed) {
  const double n = force.norm();
  if (n < kNullForce) return previous;
  return force * (speed / n);
}

bool must_return(double battery, const Vec3& position, const Vec3& base, double speed, double dt) {
  return battery <= distance(position, base) / speed + dt;
}

Vec3 random_target(const EnvBounds& env, Rng& rng) {
  std::uniform_real_distribution<double> ux(0.0, env.width);
  std::uniform_real_distribution<double> uy(0.0, env.height);
  const double x = ux(rng);
  const double y = uy(rng);
  return {x, y, 0.0};
}

Vec3 step_random_targets(Vec3& target, const Vec3& position, const EnvBounds& env, Rng& rng, double speed,
                         double dt) {
  if (distance(target, position) <= speed * dt) target = random_target(env, rng);
  const Vec3 d = target - position;
  const double n = d.norm();
  if (n < kNullForce) return {};
  return d * (speed / n);
}

}  // namespace mlc

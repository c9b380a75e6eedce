#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "vsense/common.hpp"

namespace vsense {

// ============================================================================
// 2D map and virtual anchors
// ============================================================================

struct MapSegment {
    Vec2 a;
    Vec2 b;
    double reflection_loss_db = 0.0;
    bool blocking = true;  // reflective surfaces occlude by default
};

struct Map2D {
    std::vector<MapSegment> segments;

    void validate() const {
        for (const auto& s : segments) {
            if ((s.a - s.b).norm() == 0.0)
                throw std::invalid_argument("Map2D: degenerate segment (a == b)");
            if (!std::isfinite(s.reflection_loss_db) || s.reflection_loss_db < 0.0)
                throw std::invalid_argument("Map2D: reflection loss must be finite and >= 0");
        }
    }
};

// Mirrored sensor image. Order 0 is the physical sensor; an order-k anchor is
// the sensor reflected across the k segments in segment_chain, sensor side
// first.
struct VirtualAnchor {
    Vec2 position;
    int order = 0;
    std::vector<int> segment_chain;
    double cumulative_loss_db = 0.0;
};

inline Vec2 reflect_across(const Vec2& p, const MapSegment& seg) {
    Vec2 d = seg.b - seg.a;
    double len = d.norm();
    if (len == 0.0) throw std::invalid_argument("reflect_across: degenerate segment");
    Vec2 n{-d.y / len, d.x / len};
    double h = (p - seg.a).dot(n);
    return p - n * (2.0 * h);
}

// Image-tree enumeration up to max_order with same-segment pruning (no
// immediate back-reflection) and positional deduplication at 1e-9 m.
inline std::vector<VirtualAnchor> mirror_anchors(const Map2D& map, Vec2 sensor, int max_order) {
    map.validate();
    if (max_order < 0) throw std::invalid_argument("mirror_anchors: max_order must be >= 0");

    std::vector<VirtualAnchor> anchors;
    anchors.push_back({sensor, 0, {}, 0.0});
    std::size_t level_begin = 0;
    for (int order = 1; order <= max_order; ++order) {
        std::size_t level_end = anchors.size();
        for (std::size_t i = level_begin; i < level_end; ++i) {
            for (int s = 0; s < static_cast<int>(map.segments.size()); ++s) {
                const auto parent = anchors[i];
                if (!parent.segment_chain.empty() && parent.segment_chain.back() == s) continue;
                Vec2 img = reflect_across(parent.position, map.segments[s]);
                bool dup = false;
                for (const auto& existing : anchors) {
                    if ((existing.position - img).norm() < 1e-9) {
                        dup = true;
                        break;
                    }
                }
                if (dup) continue;
                VirtualAnchor va;
                va.position = img;
                va.order = order;
                va.segment_chain = parent.segment_chain;
                va.segment_chain.push_back(s);
                va.cumulative_loss_db =
                    parent.cumulative_loss_db + map.segments[s].reflection_loss_db;
                anchors.push_back(std::move(va));
            }
        }
        level_begin = level_end;
    }
    return anchors;
}

// ============================================================================
// Specular path tracing
// ============================================================================

struct PathSolution {
    bool valid = false;
    std::vector<Vec2> reflection_points;  // sensor-side first
    double path_length = 0.0;             // m
    double tof = 0.0;                     // s
};

namespace detail {

// Intersection of segment pq with segment ab; returns parameters (u on pq,
// w on ab) when the lines are not parallel.
inline bool line_intersect(Vec2 p, Vec2 q, Vec2 a, Vec2 b, double& u, double& w) {
    Vec2 r = q - p;
    Vec2 s = b - a;
    double den = r.cross(s);
    if (std::abs(den) < 1e-15 * std::max(1.0, r.norm() * s.norm())) return false;
    Vec2 ap = a - p;
    u = ap.cross(s) / den;
    w = ap.cross(r) / den;
    return true;
}

// True when the open interior of leg pq crosses a blocking segment. Segments
// listed in skip (the mirrors meeting the leg's endpoints) are ignored.
inline bool leg_occluded(Vec2 p, Vec2 q, const Map2D& map, int skip_a, int skip_b) {
    for (int s = 0; s < static_cast<int>(map.segments.size()); ++s) {
        if (s == skip_a || s == skip_b) continue;
        if (!map.segments[s].blocking) continue;
        double u, w;
        if (!line_intersect(p, q, map.segments[s].a, map.segments[s].b, u, w)) continue;
        if (u > 1e-9 && u < 1.0 - 1e-9 && w > -1e-9 && w < 1.0 + 1e-9) return true;
    }
    return false;
}

}  // namespace detail

// Backtracks the image-method path from the anchor to the target: intersect
// the straight image->target line with each chain segment in reverse order,
// unfolding the image one reflection at a time. Valid only when every
// reflection point lies strictly inside its segment and no leg crosses a
// blocking segment. By the image identity, path_length is simply
// |anchor - target|.
inline PathSolution trace_specular_path(const VirtualAnchor& anchor, Vec2 target, const Map2D& map) {
    map.validate();
    PathSolution sol;
    sol.path_length = (anchor.position - target).norm();
    sol.tof = sol.path_length / kSpeedOfLight;

    const auto& chain = anchor.segment_chain;
    std::vector<Vec2> points(chain.size());
    Vec2 image = anchor.position;
    Vec2 ahead = target;  // next point along the path on the target side
    for (int j = static_cast<int>(chain.size()) - 1; j >= 0; --j) {
        const auto& seg = map.segments[chain[j]];
        double u, w;
        if (!detail::line_intersect(image, ahead, seg.a, seg.b, u, w)) return sol;
        if (u <= 1e-9 || u >= 1.0 - 1e-9) return sol;   // crossing must sit between image and next point
        if (w <= 1e-9 || w >= 1.0 - 1e-9) return sol;   // strictly inside the segment
        points[j] = seg.a + (seg.b - seg.a) * w;
        ahead = points[j];
        image = reflect_across(image, seg);  // involution: recover the previous-order image
    }
    Vec2 sensor = image;

    // occlusion along each leg; mirrors at a leg's endpoints are skipped
    Vec2 prev = sensor;
    int prev_seg = -1;
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (detail::leg_occluded(prev, points[j], map, prev_seg, chain[j])) return sol;
        prev = points[j];
        prev_seg = chain[j];
    }
    if (detail::leg_occluded(prev, target, map, prev_seg, -1)) return sol;

    sol.valid = true;
    sol.reflection_points = std::move(points);
    return sol;
}

// ============================================================================
// Range measurement and localization
// ============================================================================

struct RangeMeasurement {
    int anchor_id = -1;  // index into the anchor list
    double range = 0.0;  // m, one-way image distance
};

// ToF ranging through every valid anchor path: range = path_length plus
// Gaussian noise. Anchors without a valid path to the target are omitted.
inline std::vector<RangeMeasurement> measure_ranges(Vec2 target,
                                                    const std::vector<VirtualAnchor>& anchors,
                                                    const Map2D& map, double sigma_range,
                                                    std::uint64_t seed) {
    Rng rng(seed);
    std::vector<RangeMeasurement> out;
    for (int i = 0; i < static_cast<int>(anchors.size()); ++i) {
        auto path = trace_specular_path(anchors[i], target, map);
        if (!path.valid) continue;
        out.push_back({i, path.path_length + sigma_range * rng.gaussian()});
    }
    if (out.empty()) throw std::runtime_error("measure_ranges: no valid paths to target");
    return out;
}

// Nearest-predicted-ToF association for unlabeled range measurements, gated at
// gate_sigmas * sigma_range around the ranges predicted from a prior position.
inline std::vector<RangeMeasurement> associate_ranges(const std::vector<double>& ranges,
                                                      const std::vector<VirtualAnchor>& anchors,
                                                      const Map2D& map, Vec2 prior,
                                                      double sigma_range, double gate_sigmas = 3.0) {
    std::vector<std::pair<int, double>> predicted;  // (anchor_id, predicted range)
    for (int i = 0; i < static_cast<int>(anchors.size()); ++i) {
        auto path = trace_specular_path(anchors[i], prior, map);
        if (path.valid) predicted.emplace_back(i, path.path_length);
    }
    std::vector<RangeMeasurement> out;
    std::vector<bool> used(predicted.size(), false);
    for (double r : ranges) {
        int best = -1;
        double best_err = gate_sigmas * sigma_range;
        for (std::size_t k = 0; k < predicted.size(); ++k) {
            if (used[k]) continue;
            double err = std::abs(predicted[k].second - r);
            if (err <= best_err) {
                best_err = err;
                best = static_cast<int>(k);
            }
        }
        if (best >= 0) {
            used[best] = true;
            out.push_back({predicted[best].first, r});
        }
    }
    return out;
}

struct LocalizationResult {
    Vec2 position;
    double residual_norm = 0.0;  // m
    int iterations = 0;
    double crlb_trace = std::numeric_limits<double>::quiet_NaN();  // m^2, when sigma supplied
    struct {
        bool degenerate_geometry = false;
        bool non_converged = false;
    } flags;
};

struct CrlbResult {
    Mat2 bound;  // m^2 covariance lower bound
    bool singular = true;
};

// FIM = (1/sigma^2) sum u_i u_i^T with u_i the unit vector anchor -> target.
inline CrlbResult localization_crlb(const std::vector<Vec2>& anchor_positions, Vec2 target,
                                    double sigma_range) {
    if (sigma_range <= 0.0) throw std::invalid_argument("localization_crlb: sigma_range must be > 0");
    if (anchor_positions.empty()) throw std::invalid_argument("localization_crlb: need >= 1 anchor");
    Mat2 fim;
    for (const auto& a : anchor_positions) {
        Vec2 d = target - a;
        double n = d.norm();
        if (n == 0.0) throw std::invalid_argument("localization_crlb: target coincides with an anchor");
        Vec2 u = d / n;
        fim.a11 += u.x * u.x;
        fim.a12 += u.x * u.y;
        fim.a22 += u.y * u.y;
    }
    fim.a21 = fim.a12;
    fim = fim * (1.0 / (sigma_range * sigma_range));
    CrlbResult r;
    Mat2 inv;
    if (fim.invert(inv)) {
        r.singular = false;
        r.bound = inv;
    }
    return r;
}

inline CrlbResult localization_crlb(const std::vector<VirtualAnchor>& anchors, Vec2 target,
                                    double sigma_range) {
    std::vector<Vec2> pos;
    pos.reserve(anchors.size());
    for (const auto& a : anchors) pos.push_back(a.position);
    return localization_crlb(pos, target, sigma_range);
}

// Candidate initialization: pairwise ring intersections scored by total range
// residual; best-fitting intersection wins.
inline std::optional<Vec2> init_from_ring_intersections(const std::vector<RangeMeasurement>& ranges,
                                                        const std::vector<VirtualAnchor>& anchors) {
    auto residual = [&](Vec2 p) {
        double acc = 0.0;
        for (const auto& m : ranges) {
            double r = (p - anchors[m.anchor_id].position).norm();
            acc += (r - m.range) * (r - m.range);
        }
        return acc;
    };
    std::optional<Vec2> best;
    double best_res = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        for (std::size_t j = i + 1; j < ranges.size(); ++j) {
            Vec2 c1 = anchors[ranges[i].anchor_id].position;
            Vec2 c2 = anchors[ranges[j].anchor_id].position;
            double r1 = ranges[i].range, r2 = ranges[j].range;
            Vec2 d = c2 - c1;
            double L = d.norm();
            if (L == 0.0) continue;
            double x = (L * L + r1 * r1 - r2 * r2) / (2.0 * L);
            double h2 = r1 * r1 - x * x;
            double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
            Vec2 base = c1 + d * (x / L);
            Vec2 perp{-d.y / L, d.x / L};
            for (double sgn : {1.0, -1.0}) {
                Vec2 cand = base + perp * (sgn * h);
                double res = residual(cand);
                if (res < best_res) {
                    best_res = res;
                    best = cand;
                }
                if (h == 0.0) break;
            }
        }
    }
    return best;
}

// Gauss-Newton on r_i = |p - anchor_i| (one-way image distance) with
// backtracking halving. Convergence: step below step_tol or max_iters.
// Degenerate geometry is flagged from the condition of the normal matrix.
inline LocalizationResult localize(const std::vector<RangeMeasurement>& ranges,
                                   const std::vector<VirtualAnchor>& anchors, Vec2 init,
                                   double sigma_range = std::numeric_limits<double>::quiet_NaN(),
                                   int max_iters = 50, double step_tol = 1e-6) {
    if (ranges.size() < 2) throw std::invalid_argument("localize: need >= 2 range measurements");
    for (const auto& m : ranges)
        if (m.anchor_id < 0 || m.anchor_id >= static_cast<int>(anchors.size()))
            throw std::invalid_argument("localize: range references an unknown anchor");

    auto cost = [&](Vec2 p) {
        double acc = 0.0;
        for (const auto& m : ranges) {
            double e = (p - anchors[m.anchor_id].position).norm() - m.range;
            acc += e * e;
        }
        return acc;
    };

    LocalizationResult res;
    Vec2 p = init;
    double f = cost(p);
    int it = 0;
    for (; it < max_iters; ++it) {
        Mat2 jtj;
        Vec2 jte{0.0, 0.0};
        for (const auto& m : ranges) {
            Vec2 d = p - anchors[m.anchor_id].position;
            double r = d.norm();
            if (r < 1e-12) r = 1e-12;
            Vec2 u = d / r;
            double e = r - m.range;
            jtj.a11 += u.x * u.x;
            jtj.a12 += u.x * u.y;
            jtj.a22 += u.y * u.y;
            jte = jte + u * e;
        }
        jtj.a21 = jtj.a12;
        if (jtj.cond() > 1e8) res.flags.degenerate_geometry = true;
        Mat2 inv;
        if (!jtj.invert(inv)) {
            res.flags.degenerate_geometry = true;
            res.flags.non_converged = true;
            break;
        }
        Vec2 step = inv * jte * -1.0;
        double alpha = 1.0;
        Vec2 p_next = p + step;
        double f_next = cost(p_next);
        int halvings = 0;
        while (f_next > f && halvings < 20) {
            alpha *= 0.5;
            p_next = p + step * alpha;
            f_next = cost(p_next);
            ++halvings;
        }
        p = p_next;
        f = f_next;
        if ((step * alpha).norm() < step_tol) {
            ++it;
            break;
        }
        if (it == max_iters - 1) res.flags.non_converged = true;
    }
    res.position = p;
    res.iterations = it;
    res.residual_norm = std::sqrt(f);
    if (std::isfinite(sigma_range) && sigma_range > 0.0) {
        std::vector<Vec2> used;
        for (const auto& m : ranges) used.push_back(anchors[m.anchor_id].position);
        auto crlb = localization_crlb(used, p, sigma_range);
        if (!crlb.singular) res.crlb_trace = crlb.bound.trace();
    }
    return res;
}

// ============================================================================
// Integration gain and reflector selection
// ============================================================================

struct IntegrationGain {
    double gain_db = 0.0;
    double effective_snr_db = 0.0;
};

// Coherent integration over n pulses lifts a reflection with the given loss:
// effective SNR = input SNR - loss + 10 log10(n).
inline IntegrationGain integration_gain(int n_pulses, double reflection_loss_db, double snr_in_db) {
    if (n_pulses < 1) throw std::invalid_argument("integration_gain: n_pulses must be >= 1");
    IntegrationGain g;
    g.gain_db = 10.0 * std::log10(static_cast<double>(n_pulses));
    g.effective_snr_db = snr_in_db - reflection_loss_db + g.gain_db;
    return g;
}

struct ReflectorChoice {
    VirtualAnchor anchor;
    PathSolution path;
};

// Beam-steering aid: prefer line of sight; otherwise the valid first-order
// bounce minimizing cumulative loss plus 20 log10(path_length / 1 m).
inline std::optional<ReflectorChoice> select_reflector(const Map2D& map, Vec2 bs, Vec2 ue) {
    map.validate();
    if (map.segments.empty()) throw std::invalid_argument("select_reflector: empty map");
    auto anchors = mirror_anchors(map, bs, 1);
    auto los = trace_specular_path(anchors[0], ue, map);
    if (los.valid) return ReflectorChoice{anchors[0], los};

    std::optional<ReflectorChoice> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < anchors.size(); ++i) {
        auto path = trace_specular_path(anchors[i], ue, map);
        if (!path.valid) continue;
        double cost = anchors[i].cumulative_loss_db + 20.0 * std::log10(path.path_length);
        if (cost < best_cost) {
            best_cost = cost;
            best = ReflectorChoice{anchors[i], path};
        }
    }
    return best;
}

}  // namespace vsense

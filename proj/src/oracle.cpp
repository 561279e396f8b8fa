#include "htr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace htr::oracle {
namespace {

Rows matmul(const Rows& a, const Rows& b) {
  const std::size_t n = a.size();
  const std::size_t inner = b.size();
  const std::size_t m = b.empty() ? 0 : b[0].size();
  Rows out(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < inner; ++k) {
      for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool on(const Rows& m, long r, long c) { return m[r][c] > 0.5; }

std::vector<std::pair<long, long>> boundary_pixels(const Rows& m) {
  std::vector<std::pair<long, long>> out;
  const long h = static_cast<long>(m.size());
  const long w = h == 0 ? 0 : static_cast<long>(m[0].size());
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      if (!on(m, r, c)) continue;
      bool edge = false;
      const long dr[4] = {-1, 1, 0, 0};
      const long dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const long rr = r + dr[k];
        const long cc = c + dc[k];
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        if (!on(m, rr, cc)) edge = true;
      }
      if (edge) out.emplace_back(r, c);
    }
  }
  return out;
}

double fraction_within(const std::vector<std::pair<long, long>>& from,
                       const std::vector<std::pair<long, long>>& to, double radius) {
  if (from.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [r, c] : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [rr, cc] : to) {
      const double d = std::hypot(static_cast<double>(r - rr), static_cast<double>(c - cc));
      best = std::min(best, d);
    }
    if (best <= radius) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

}  // namespace

ReadoutResult readout(const Rows& queries, const Rows& keys, const Rows& values) {
  ReadoutResult out;
  for (const auto& q : queries) {
    std::vector<double> logits;
    for (const auto& k : keys) {
      double d = 0.0;
      for (std::size_t c = 0; c < q.size(); ++c) d += (q[c] - k[c]) * (q[c] - k[c]);
      logits.push_back(-d);
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& l : logits) {
      l = std::exp(l - top);
      total += l;
    }
    for (double& l : logits) l /= total;

    std::vector<double> value(values[0].size(), 0.0);
    for (std::size_t j = 0; j < keys.size(); ++j) {
      for (std::size_t c = 0; c < value.size(); ++c) value[c] += logits[j] * values[j][c];
    }
    out.affinity.push_back(std::move(logits));
    out.values.push_back(std::move(value));
  }
  return out;
}

Token aggregate(const Rows& joint, const std::vector<double>& probabilities, double tau) {
  Token t;
  t.value.assign(joint.empty() ? 0 : joint[0].size(), 0.0);
  double weight = 0.0;
  for (std::size_t j = 0; j < joint.size(); ++j) {
    const double step = probabilities[j] - tau > 0.0 ? 1.0 : 0.0;
    const double w = step * probabilities[j];
    weight += w;
    for (std::size_t c = 0; c < t.value.size(); ++c) t.value[c] += w * joint[j][c];
  }
  if (weight == 0.0) return t;
  for (double& v : t.value) v /= weight;
  t.defined = true;
  return t;
}

HybridResult hybrid(const HybridInputs& in) {
  const std::size_t cy = in.mask_proj[0].size();
  const int g = 16;

  Rows mem_keys;
  Rows mem_values;
  Rows mem_visual;
  std::vector<double> mem_probs;
  for (std::size_t t = 0; t < in.ref_features.size(); ++t) {
    const Rows keys = matmul(in.ref_features[t], in.key_proj);
    const Rows& mask = in.ref_masks[t];
    const std::size_t nodes = in.ref_features[t].size();
    for (std::size_t node = 0; node < nodes; ++node) {
      const long gr = static_cast<long>(node) / in.grid_width;
      const long gc = static_cast<long>(node) % in.grid_width;
      std::vector<double> cell(256, 0.0);
      double sum = 0.0;
      for (int dr = 0; dr < g; ++dr) {
        for (int dc = 0; dc < g; ++dc) {
          const long r = gr * g + dr;
          const long c = gc * g + dc;
          double v = 0.0;
          if (r < static_cast<long>(mask.size()) && c < static_cast<long>(mask[0].size())) v = mask[r][c];
          cell[static_cast<std::size_t>(dr * g + dc)] = v;
          sum += v;
        }
      }
      std::vector<double> value(cy + 2, 0.0);
      for (std::size_t k = 0; k < 256; ++k) {
        for (std::size_t c = 0; c < cy; ++c) value[c] += cell[k] * in.mask_proj[k][c];
      }
      const double fg = sum / 256.0;
      value[cy] = fg;
      value[cy + 1] = 1.0 - fg;
      mem_keys.push_back(keys[node]);
      mem_values.push_back(value);
      mem_visual.push_back(in.ref_features[t][node]);
      mem_probs.push_back(fg);
    }
  }

  HybridResult out;
  const Rows query_keys = matmul(in.query_features, in.key_proj);
  ReadoutResult local = readout(query_keys, mem_keys, mem_values);
  out.affinity = std::move(local.affinity);
  out.values = std::move(local.values);

  auto concat = [](const Rows& a, const Rows& b) {
    Rows out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[i] = a[i];
      out[i].insert(out[i].end(), b[i].begin(), b[i].end());
    }
    return out;
  };
  const Rows mem_joint = matmul(concat(mem_values, mem_visual), in.joint_proj);
  std::vector<double> bg_probs(mem_probs.size());
  for (std::size_t j = 0; j < mem_probs.size(); ++j) bg_probs[j] = 1.0 - mem_probs[j];
  const Token fg = aggregate(mem_joint, mem_probs, in.tau);
  const Token bg = aggregate(mem_joint, bg_probs, in.tau);
  out.tokens_defined = fg.defined && bg.defined;
  if (!out.tokens_defined) return out;
  out.fg_token = fg.value;
  out.bg_token = bg.value;

  const Rows query_joint = matmul(concat(out.values, in.query_features), in.joint_proj);
  for (const auto& row : query_joint) {
    out.node_object.push_back({dot(row, fg.value), dot(row, bg.value)});
  }
  return out;
}

BruteAssignment brute_force_assignment(const Rows& cost) {
  const std::size_t n = cost.size();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  BruteAssignment best;
  best.cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t r = 0; r < n; ++r) c += cost[r][static_cast<std::size_t>(perm[r])];
    if (c < best.cost) {
      best.cost = c;
      best.row_to_col = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double inter = (ix2 > ix1 && iy2 > iy1) ? (ix2 - ix1) * (iy2 - iy1) : 0.0;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BoxXYXY& a, const BoxXYXY& b) {
  const double inter_w = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double inter_h = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) -
                     inter_w * inter_h;
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) *
                      (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  const double base = iou(a, b);
  return hull > 0.0 ? base - (hull - uni) / hull : base;
}

double jaccard(const Rows& pred, const Rows& gt) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t r = 0; r < gt.size(); ++r) {
    for (std::size_t c = 0; c < gt[r].size(); ++c) {
      const bool p = pred[r][c] > 0.5;
      const bool g = gt[r][c] > 0.5;
      inter += (p && g) ? 1 : 0;
      uni += (p || g) ? 1 : 0;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double boundary_f(const Rows& pred, const Rows& gt, double radius) {
  const auto pb = boundary_pixels(pred);
  const auto gb = boundary_pixels(gt);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  const double precision = fraction_within(pb, gb, radius);
  const double recall = fraction_within(gb, pb, radius);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double mcs(const Rows& table, double tau) {
  double consistent = 0.0;
  for (const auto& video : table) {
    bool all = true;
    for (double j : video) all = all && (j > tau);
    consistent += all ? 1.0 : 0.0;
  }
  return consistent / static_cast<double>(table.size());
}

}  // namespace htr::oracle

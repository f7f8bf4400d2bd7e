// Independent brute-force reference implementations. None of these call into
// the library code they check; they share only the plain data types.
#pragma once

#include "lens/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using lens::BinaryMask;
using lens::Point;

/// Classic crossing-number test.
inline bool inside(const std::vector<Point>& poly, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

inline BinaryMask rasterize(const std::vector<Point>& poly, int w, int h) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (inside(poly, x + 0.5, y + 0.5)) m.set(x, y);
        }
    }
    return m;
}

/// Union of translated square structuring elements.
inline BinaryMask dilate(const BinaryMask& m, int r) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y)) continue;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height()) out.set(nx, ny);
                }
            }
        }
    }
    return out;
}

/// Pixel kept iff its whole window lies on the canvas and is set.
inline BinaryMask erode(const BinaryMask& m, int r) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool all = true;
            for (int dy = -r; dy <= r && all; ++dy) {
                for (int dx = -r; dx <= r && all; ++dx) all = m.get(x + dx, y + dy);
            }
            if (all) out.set(x, y);
        }
    }
    return out;
}

inline BinaryMask complement(const BinaryMask& m) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y)) out.set(x, y);
        }
    }
    return out;
}

/// BFS over unset pixels from the border; everything not reached is set.
inline BinaryMask fill_holes(const BinaryMask& m) {
    const int w = m.width();
    const int h = m.height();
    std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
    std::queue<std::pair<int, int>> q;
    auto push = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= w || y >= h || m.get(x, y)) return;
        char& s = seen[static_cast<std::size_t>(y) * w + x];
        if (s) return;
        s = 1;
        q.push({x, y});
    };
    for (int x = 0; x < w; ++x) {
        push(x, 0);
        push(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        push(0, y);
        push(w - 1, y);
    }
    while (!q.empty()) {
        const auto [x, y] = q.front();
        q.pop();
        push(x + 1, y);
        push(x - 1, y);
        push(x, y + 1);
        push(x, y - 1);
    }
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!seen[static_cast<std::size_t>(y) * w + x]) out.set(x, y);
        }
    }
    return out;
}

/// Component sizes by union-find, sorted descending.
inline std::vector<std::size_t> component_sizes(const BinaryMask& m, int connectivity) {
    const int w = m.width();
    const int h = m.height();
    std::vector<int> parent(static_cast<std::size_t>(w) * h);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
    auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m.get(x, y)) continue;
            const int id = y * w + x;
            if (m.get(x - 1, y)) unite(id, id - 1);
            if (m.get(x, y - 1)) unite(id, id - w);
            if (connectivity == 8) {
                if (m.get(x - 1, y - 1)) unite(id, id - w - 1);
                if (m.get(x + 1, y - 1)) unite(id, id - w + 1);
            }
        }
    }
    std::vector<std::size_t> count(parent.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (m.get(x, y)) ++count[static_cast<std::size_t>(find(y * w + x))];
        }
    }
    std::vector<std::size_t> sizes;
    for (std::size_t c : count) {
        if (c > 0) sizes.push_back(c);
    }
    std::sort(sizes.rbegin(), sizes.rend());
    return sizes;
}

inline std::size_t count(const BinaryMask& m) {
    std::size_t n = 0;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) n += m.get(x, y) ? 1 : 0;
    }
    return n;
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const bool p = a.get(x, y);
            const bool q = b.get(x, y);
            inter += (p && q) ? 1 : 0;
            uni += (p || q) ? 1 : 0;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Integer box [x0,x1) x [y0,y1).
struct IBox {
    int x0, y0, x1, y1;
};

/// IoU by counting unit cells.
inline double box_iou_cells(const IBox& a, const IBox& b) {
    const int lx = std::min(a.x0, b.x0), ly = std::min(a.y0, b.y0);
    const int hx = std::max(a.x1, b.x1), hy = std::max(a.y1, b.y1);
    long inter = 0;
    long uni = 0;
    for (int y = ly; y < hy; ++y) {
        for (int x = lx; x < hx; ++x) {
            const bool p = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
            const bool q = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
            inter += (p && q) ? 1 : 0;
            uni += (p || q) ? 1 : 0;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct Match {
    std::size_t tp = 0, fp = 0, fn = 0;
    /// Per prediction in descending-score order.
    std::vector<bool> sweep_tp;
};

/// Greedy matching from an IoU matrix iou[pred][gt].
inline Match greedy(const std::vector<double>& scores, const std::vector<std::vector<double>>& iou, std::size_t n_gt,
                    double t) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    std::vector<bool> used(n_gt, false);
    Match m;
    for (std::size_t p : order) {
        int best = -1;
        double best_iou = -1;
        for (std::size_t g = 0; g < n_gt; ++g) {
            if (!used[g] && iou[p][g] >= t && iou[p][g] > best_iou) {
                best = static_cast<int>(g);
                best_iou = iou[p][g];
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = true;
            ++m.tp;
        } else {
            ++m.fp;
        }
        m.sweep_tp.push_back(best >= 0);
    }
    m.fn = n_gt - m.tp;
    return m;
}

/// 101-point interpolated AP from the prefix operating points.
inline double ap(const std::vector<double>& scores, const std::vector<std::vector<double>>& iou, std::size_t n_gt, double t) {
    if (n_gt == 0) return scores.empty() ? 1.0 : 0.0;
    const Match m = greedy(scores, iou, n_gt, t);
    std::vector<double> rec;
    std::vector<double> prec;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < m.sweep_tp.size(); ++k) {
        tp += m.sweep_tp[k] ? 1 : 0;
        rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
        prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    }
    double sum = 0;
    for (int i = 0; i <= 100; ++i) {
        const double r = i / 100.0;
        double best = 0;
        for (std::size_t k = 0; k < rec.size(); ++k) {
            if (rec[k] >= r) best = std::max(best, prec[k]);
        }
        sum += best;
    }
    return sum / 101.0;
}

inline std::pair<double, double> precision_recall(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double p = tp + fp == 0 ? (fn == 0 ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    return {p, r};
}

// --- Exact minimum page count for small packing instances -------------------

struct Rect {
    double w, h;
};

/**
 * Exact orthogonal packing test: every pair of rectangles is separated
 * horizontally or vertically; branch over the four relations per pair and
 * prune with longest-path bounds on both axes.
 */
class OrthogonalPacking {
public:
    OrthogonalPacking(std::vector<Rect> items, double W, double H) : r_(std::move(items)), W_(W), H_(H) {
        const std::size_t n = r_.size();
        hrel_.assign(n, std::vector<char>(n, 0));
        vrel_.assign(n, std::vector<char>(n, 0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) pairs_.push_back({i, j});
        }
    }

    bool feasible() {
        double area = 0;
        for (const Rect& x : r_) {
            if (x.w > W_ + eps || x.h > H_ + eps) return false;
            area += x.w * x.h;
        }
        if (area > W_ * H_ + eps) return false;
        return search(0);
    }

private:
    static constexpr double eps = 1e-9;

    /// Longest path extent along one axis; +inf on a cycle.
    double extent(const std::vector<std::vector<char>>& rel, bool horizontal) const {
        const std::size_t n = r_.size();
        std::vector<double> pos(n, 0.0);
        for (std::size_t round = 0; round <= n; ++round) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (!rel[i][j]) continue;
                    const double need = pos[i] + (horizontal ? r_[i].w : r_[i].h);
                    if (need > pos[j] + eps) {
                        pos[j] = need;
                        changed = true;
                    }
                }
            }
            if (!changed) {
                double e = 0;
                for (std::size_t i = 0; i < n; ++i) e = std::max(e, pos[i] + (horizontal ? r_[i].w : r_[i].h));
                return e;
            }
        }
        return std::numeric_limits<double>::infinity();
    }

    bool search(std::size_t k) {
        if (k == pairs_.size()) return true;
        const auto [i, j] = pairs_[k];
        const bool side_by_side = r_[i].w + r_[j].w <= W_ + eps;
        const bool stacked = r_[i].h + r_[j].h <= H_ + eps;
        if (side_by_side) {
            for (int dir = 0; dir < 2; ++dir) {
                const std::size_t a = dir == 0 ? i : j;
                const std::size_t b = dir == 0 ? j : i;
                hrel_[a][b] = 1;
                if (extent(hrel_, true) <= W_ + eps && search(k + 1)) return true;
                hrel_[a][b] = 0;
            }
        }
        if (stacked) {
            for (int dir = 0; dir < 2; ++dir) {
                const std::size_t a = dir == 0 ? i : j;
                const std::size_t b = dir == 0 ? j : i;
                vrel_[a][b] = 1;
                if (extent(vrel_, false) <= H_ + eps && search(k + 1)) return true;
                vrel_[a][b] = 0;
            }
        }
        return false;
    }

    std::vector<Rect> r_;
    double W_, H_;
    std::vector<std::vector<char>> hrel_, vrel_;
    std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

/**
 * Minimum number of pages for items that must keep @p gutter between each
 * other (not from the printable edge). Inflating every item and the page by
 * the gutter turns this into plain non-overlapping packing. n <= ~10.
 */
inline int min_pages(const std::vector<Rect>& items, double W, double H, double gutter) {
    const std::size_t n = items.size();
    if (n == 0) return 0;
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<char> fits(full + 1, 0);
    for (std::size_t s = 1; s <= full; ++s) {
        std::vector<Rect> sub;
        for (std::size_t i = 0; i < n; ++i) {
            if (s >> i & 1) sub.push_back({items[i].w + gutter, items[i].h + gutter});
        }
        fits[s] = OrthogonalPacking(sub, W + gutter, H + gutter).feasible() ? 1 : 0;
    }
    std::vector<int> best(full + 1, std::numeric_limits<int>::max());
    best[0] = 0;
    for (std::size_t s = 1; s <= full; ++s) {
        const std::size_t low = s & (~s + 1);
        // Enumerate subsets of s that contain its lowest item.
        for (std::size_t t = s; t > 0; t = (t - 1) & s) {
            if (!(t & low) || !fits[t] || best[s ^ t] == std::numeric_limits<int>::max()) continue;
            best[s] = std::min(best[s], best[s ^ t] + 1);
        }
    }
    return best[full];
}

} // namespace oracle

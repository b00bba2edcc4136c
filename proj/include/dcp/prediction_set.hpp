#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace dcp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One interval on the real line. Ends may be open or closed; infinite ends
// are always open by construction.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_open = false;

  static Interval closed(double lo, double hi) { return {lo, hi, false, false}; }
  static Interval open(double lo, double hi) { return {lo, hi, true, true}; }

  bool contains(double y) const {
    if (y < lo || (y == lo && lo_open)) return false;
    if (y > hi || (y == hi && hi_open)) return false;
    return true;
  }

  bool empty() const { return lo > hi || (lo == hi && (lo_open || hi_open)); }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

// Tighter of the two constraints on each side; may come out empty.
inline Interval intersect(const Interval& a, const Interval& b) {
  Interval r;
  if (a.lo > b.lo) {
    r.lo = a.lo;
    r.lo_open = a.lo_open;
  } else if (b.lo > a.lo) {
    r.lo = b.lo;
    r.lo_open = b.lo_open;
  } else {
    r.lo = a.lo;
    r.lo_open = a.lo_open || b.lo_open;
  }
  if (a.hi < b.hi) {
    r.hi = a.hi;
    r.hi_open = a.hi_open;
  } else if (b.hi < a.hi) {
    r.hi = b.hi;
    r.hi_open = b.hi_open;
  } else {
    r.hi = a.hi;
    r.hi_open = a.hi_open || b.hi_open;
  }
  return r;
}

// Window substituted for infinite ends when reporting lengths, so an
// unbounded set still gets a finite, flagged length.
struct ClipWindow {
  double lo = 0.0;
  double hi = 0.0;
};

// A finite union of disjoint intervals, kept sorted and merged. Adjacent
// intervals merge when they overlap or touch with at least one closed end;
// (a,b) followed by (b,c) stays two pieces since b itself is excluded.
class PredictionSet {
 public:
  PredictionSet() = default;

  explicit PredictionSet(std::vector<Interval> pieces,
                         std::optional<ClipWindow> clip = std::nullopt)
      : intervals_(normalize(std::move(pieces))), clip_(clip) {}

  const std::vector<Interval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  const std::optional<ClipWindow>& clip_window() const { return clip_; }

  bool contains(double y) const {
    for (const Interval& iv : intervals_) {
      if (y < iv.lo) break;
      if (iv.contains(y)) return true;
    }
    return false;
  }

  // Total width. Infinite ends are replaced by the clip window when one is
  // set; without a window an unbounded set has infinite length.
  double length() const {
    double total = 0.0;
    for (const Interval& iv : intervals_) {
      double lo = iv.lo;
      double hi = iv.hi;
      if (clip_) {
        if (!std::isfinite(lo)) lo = clip_->lo;
        if (!std::isfinite(hi)) hi = clip_->hi;
      }
      total += std::max(0.0, hi - lo);
    }
    return total;
  }

  // True when length() substituted the window for an infinite end.
  bool clipped() const {
    if (!clip_) return false;
    for (const Interval& iv : intervals_)
      if (!iv.bounded()) return true;
    return false;
  }

  // Smallest single interval containing the set.
  PredictionSet hull() const {
    if (intervals_.empty()) return *this;
    Interval h{intervals_.front().lo, intervals_.back().hi,
               intervals_.front().lo_open, intervals_.back().hi_open};
    PredictionSet out;
    out.intervals_ = {h};
    out.clip_ = clip_;
    return out;
  }

 private:
  static std::vector<Interval> normalize(std::vector<Interval> pieces) {
    pieces.erase(std::remove_if(pieces.begin(), pieces.end(),
                                [](const Interval& iv) { return iv.empty(); }),
                 pieces.end());
    std::sort(pieces.begin(), pieces.end(), [](const Interval& x, const Interval& y) {
      if (x.lo != y.lo) return x.lo < y.lo;
      if (x.lo_open != y.lo_open) return !x.lo_open;  // closed end first
      return x.hi < y.hi;
    });
    std::vector<Interval> merged;
    for (const Interval& iv : pieces) {
      if (merged.empty()) {
        merged.push_back(iv);
        continue;
      }
      Interval& back = merged.back();
      const bool joins = iv.lo < back.hi ||
                         (iv.lo == back.hi && !(iv.lo_open && back.hi_open));
      if (!joins) {
        merged.push_back(iv);
        continue;
      }
      if (iv.hi > back.hi || (iv.hi == back.hi && back.hi_open && !iv.hi_open)) {
        back.hi = iv.hi;
        back.hi_open = iv.hi_open;
      }
    }
    return merged;
  }

  std::vector<Interval> intervals_;
  std::optional<ClipWindow> clip_;
};

inline PredictionSet hullify(const PredictionSet& s) { return s.hull(); }

}  // namespace dcp

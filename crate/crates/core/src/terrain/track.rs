use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Stadium-shaped racing line: two straights parallel to the x axis joined by
/// two semicircles, driven counter-clockwise.
///
/// Arc length starts at the left end of the lower straight. The two
/// semicircles are the turn regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackLine {
    pub center: [f64; 2],
    pub straight_length: f64,
    pub corner_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackProjection {
    /// Unsigned distance to the nearest point of the line.
    pub distance: f64,
    /// Distance signed positive to the left of the driving direction.
    pub offset: f64,
    /// Arc length of the nearest point, in `[0, length)`.
    pub s: f64,
}

impl Default for TrackLine {
    fn default() -> Self {
        Self { center: [0.0, 0.0], straight_length: 2.0, corner_radius: 1.0 }
    }
}

impl TrackLine {
    pub fn length(&self) -> f64 {
        2.0 * self.straight_length + 2.0 * PI * self.corner_radius
    }

    /// Arc-length intervals of the two semicircles.
    pub fn turn_regions(&self) -> [(f64, f64); 2] {
        let (l, arc) = (self.straight_length, PI * self.corner_radius);
        [(l, l + arc), (2.0 * l + arc, 2.0 * l + 2.0 * arc)]
    }

    pub fn in_turn(&self, s: f64) -> bool {
        let s = s.rem_euclid(self.length());
        self.turn_regions().iter().any(|&(a, b)| s >= a && s < b)
    }

    /// Point and tangent heading at arc length `s` (wrapped).
    pub fn pose_at(&self, s: f64) -> ([f64; 2], f64) {
        let (l, r) = (self.straight_length, self.corner_radius);
        let arc = PI * r;
        let [cx, cy] = self.center;
        let s = s.rem_euclid(self.length());
        if s < l {
            ([cx - l / 2.0 + s, cy - r], 0.0)
        } else if s < l + arc {
            let th = -PI / 2.0 + (s - l) / r;
            ([cx + l / 2.0 + r * th.cos(), cy + r * th.sin()], th + PI / 2.0)
        } else if s < 2.0 * l + arc {
            ([cx + l / 2.0 - (s - l - arc), cy + r], PI)
        } else {
            let th = PI / 2.0 + (s - 2.0 * l - arc) / r;
            ([cx - l / 2.0 + r * th.cos(), cy + r * th.sin()], th + PI / 2.0)
        }
    }

    /// Nearest point on the line, in closed form per segment.
    pub fn project(&self, p: [f64; 2]) -> TrackProjection {
        let (l, r) = (self.straight_length, self.corner_radius);
        let arc = PI * r;
        let [cx, cy] = self.center;
        let (px, py) = (p[0] - cx, p[1] - cy);
        let half = l / 2.0;

        // (distance, s) candidates.
        let mut best = (f64::INFINITY, 0.0);
        let mut consider = |d: f64, s: f64| {
            if d < best.0 {
                best = (d, s);
            }
        };
        // Lower straight, driven +x.
        let t = (px + half).clamp(0.0, l);
        consider((px - (-half + t)).hypot(py + r), t);
        // Upper straight, driven -x.
        let t = (half - px).clamp(0.0, l);
        consider((px - (half - t)).hypot(py - r), l + arc + t);
        // Right semicircle.
        if px >= half {
            let (dx, dy) = (px - half, py);
            let th = dy.atan2(dx);
            consider((dx.hypot(dy) - r).abs(), l + (th + PI / 2.0) * r);
        }
        // Left semicircle.
        if px <= -half {
            let (dx, dy) = (px + half, py);
            let th = dy.atan2(dx).rem_euclid(2.0 * PI);
            consider((dx.hypot(dy) - r).abs(), 2.0 * l + arc + (th - PI / 2.0) * r);
        }

        let (distance, s) = best;
        let s = s.rem_euclid(self.length());
        let (q, heading) = self.pose_at(s);
        let (sh, ch) = heading.sin_cos();
        let cross = ch * (p[1] - q[1]) - sh * (p[0] - q[0]);
        TrackProjection { distance, offset: if cross < 0.0 { -distance } else { distance }, s }
    }

    pub fn cross_track_distance(&self, p: [f64; 2]) -> f64 {
        self.project(p).distance
    }

    /// Axis-aligned bounding box `[min_x, min_y, max_x, max_y]` of the line.
    pub fn bounds(&self) -> [f64; 4] {
        let [cx, cy] = self.center;
        let hx = self.straight_length / 2.0 + self.corner_radius;
        let hy = self.corner_radius;
        [cx - hx, cy - hy, cx + hx, cy + hy]
    }
}

/// Signed shortest advance from `s_prev` to `s_now` along a closed track of
/// length `track.length()`, counter-clockwise positive.
pub fn progress_delta(track: &TrackLine, s_prev: f64, s_now: f64) -> f64 {
    let len = track.length();
    let d = (s_now - s_prev).rem_euclid(len);
    if d > len / 2.0 {
        d - len
    } else {
        d
    }
}

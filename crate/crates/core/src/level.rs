//! Course geometry, the planned-route corridor, level files and the
//! accessibility checks applied to them.
//!
//! Level files are JSON documents (`levels/*.level.json`):
//!
//! ```json
//! {
//!   "id": "straight_corridor",
//!   "walls": [[x1, y1, x2, y2], ...],
//!   "circles": [[cx, cy, r], ...],
//!   "rects": [[xmin, ymin, xmax, ymax], ...],
//!   "route": [[x, y], ...],
//!   "corridor_half_width": 0.75,
//!   "start": [x, y, heading],
//!   "goal": [cx, cy, r],
//!   "waypoints": [[cx, cy, r], ...],
//!   "palette": {"background": "#FFFFFF", "route": "#1A1A1A", ...},
//!   "decoration_count": 2
//! }
//! ```
//!
//! `walls`, `circles`, `rects`, `waypoints` and `decoration_count` may be omitted.

use crate::chair::ChairParams;
use crate::geometry::{
    circle_signed_distance, rect_signed_distance, segment_signed_distance, Circle, Rect, Segment,
    SignedDistance, Vec2,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// Minimum length of a route or wall segment, in meters.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum LevelError {
    #[error("parse error at line {line}, column {column} (field `{path}`): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid level: {}", .0.join("; "))]
    Validation(Vec<String>),
}

/// Planned route polyline with precomputed cumulative arc length.
#[derive(Debug, Clone)]
pub struct Route {
    vertices: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl PartialEq for Route {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

/// Result of projecting a point onto the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteProjection {
    /// Distance from the point to the route, meters.
    pub distance: f64,
    /// Arc length from the route start to the projected point, meters.
    pub s: f64,
    pub point: Vec2,
}

impl Route {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, String> {
        if vertices.len() < 2 {
            return Err(format!(
                "route needs at least 2 vertices, got {}",
                vertices.len()
            ));
        }
        if let Some(v) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(format!("route vertex {v} is not finite"));
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        cumulative.push(0.0);
        for (i, pair) in vertices.windows(2).enumerate() {
            let len = pair[0].distance(pair[1]);
            if len <= MIN_SEGMENT_LENGTH {
                return Err(format!(
                    "route segment {i} is degenerate (length {len:e} m)"
                ));
            }
            cumulative.push(cumulative[i] + len);
        }
        Ok(Self {
            vertices,
            cumulative,
        })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().expect("route has vertices")
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.vertices.windows(2).map(|w| Segment::new(w[0], w[1]))
    }

    /// Nearest point on the polyline. Equal distances resolve to the smaller arc length.
    pub fn project(&self, p: Vec2) -> RouteProjection {
        let mut best: Option<RouteProjection> = None;
        for (i, seg) in self.segments().enumerate() {
            let (point, t) = seg.closest_point(p);
            let distance = point.distance(p);
            if best.is_none_or(|b| distance < b.distance) {
                let seg_len = self.cumulative[i + 1] - self.cumulative[i];
                let s = (self.cumulative[i] + t * seg_len).min(self.total_length());
                best = Some(RouteProjection { distance, s, point });
            }
        }
        best.expect("route has at least one segment")
    }
}

/// Free-function form of [`Route::project`].
pub fn project_to_route(p: Vec2, route: &Route) -> RouteProjection {
    route.project(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

/// 8-bit sRGB color, written as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const BLACK: Rgb = Rgb(0, 0, 0);
    pub const WHITE: Rgb = Rgb(0xFF, 0xFF, 0xFF);
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix('#')
            .filter(|h| h.len() == 6 && h.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| format!("expected a color of the form #RRGGBB, got {s:?}"))?;
        let channel = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("validated hex");
        Ok(Rgb(channel(0), channel(2), channel(4)))
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub background: Rgb,
    pub route: Rgb,
    pub chair: Rgb,
    pub obstacle: Rgb,
    pub reward: Rgb,
}

/// Identifies one obstacle of a level: `wall:3`, `circle:0`, `rect:1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObstacleId {
    Wall(usize),
    Circle(usize),
    Rect(usize),
}

impl fmt::Display for ObstacleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObstacleId::Wall(i) => write!(f, "wall:{i}"),
            ObstacleId::Circle(i) => write!(f, "circle:{i}"),
            ObstacleId::Rect(i) => write!(f, "rect:{i}"),
        }
    }
}

impl FromStr for ObstacleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, index) = s
            .split_once(':')
            .ok_or_else(|| format!("bad obstacle id {s:?}"))?;
        let index: usize = index
            .parse()
            .map_err(|_| format!("bad obstacle index in {s:?}"))?;
        match kind {
            "wall" => Ok(ObstacleId::Wall(index)),
            "circle" => Ok(ObstacleId::Circle(index)),
            "rect" => Ok(ObstacleId::Rect(index)),
            _ => Err(format!("unknown obstacle kind in {s:?}")),
        }
    }
}

impl Serialize for ObstacleId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObstacleId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Wall(Segment),
    Circle(Circle),
    Rect(Rect),
}

impl Obstacle {
    pub fn signed_distance(&self, p: Vec2) -> SignedDistance {
        match self {
            Obstacle::Wall(s) => segment_signed_distance(s, p),
            Obstacle::Circle(c) => circle_signed_distance(c, p),
            Obstacle::Rect(r) => rect_signed_distance(r, p),
        }
    }
}

/// A course. Immutable once loaded; construct through [`load_level`] or
/// deserialization so the invariants hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LevelDoc", try_from = "LevelDoc")]
pub struct Level {
    pub id: String,
    pub walls: Vec<Segment>,
    pub circles: Vec<Circle>,
    pub rects: Vec<Rect>,
    pub route: Route,
    pub corridor_half_width: f64,
    pub start: Pose,
    pub goal: Circle,
    pub waypoints: Vec<Circle>,
    pub palette: Palette,
    pub decoration_count: u32,
}

impl Level {
    /// Every obstacle in a fixed order: walls, then circles, then rectangles.
    pub fn obstacles(&self) -> impl Iterator<Item = (ObstacleId, Obstacle)> + '_ {
        let walls = self
            .walls
            .iter()
            .enumerate()
            .map(|(i, w)| (ObstacleId::Wall(i), Obstacle::Wall(*w)));
        let circles = self
            .circles
            .iter()
            .enumerate()
            .map(|(i, c)| (ObstacleId::Circle(i), Obstacle::Circle(*c)));
        let rects = self
            .rects
            .iter()
            .enumerate()
            .map(|(i, r)| (ObstacleId::Rect(i), Obstacle::Rect(*r)));
        walls.chain(circles).chain(rects)
    }

    pub fn obstacle(&self, id: ObstacleId) -> Option<Obstacle> {
        match id {
            ObstacleId::Wall(i) => self.walls.get(i).copied().map(Obstacle::Wall),
            ObstacleId::Circle(i) => self.circles.get(i).copied().map(Obstacle::Circle),
            ObstacleId::Rect(i) => self.rects.get(i).copied().map(Obstacle::Rect),
        }
    }

    /// Smallest signed distance from `p` to any obstacle, with its id.
    pub fn nearest_obstacle(&self, p: Vec2) -> Option<(ObstacleId, f64)> {
        self.obstacles()
            .map(|(id, o)| (id, o.signed_distance(p).distance))
            .fold(None, |best, cur| match best {
                Some((_, d)) if d <= cur.1 => best,
                _ => Some(cur),
            })
    }

    pub fn is_on_track(&self, p: Vec2) -> bool {
        is_on_track(p, self)
    }

    /// Checks every level invariant, returning all violations found.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.id.trim().is_empty() {
            errors.push("id is empty".to_string());
        }
        if !(self.corridor_half_width.is_finite() && self.corridor_half_width > 0.0) {
            errors.push(format!(
                "corridor_half_width must be > 0, got {}",
                self.corridor_half_width
            ));
        }
        for (i, w) in self.walls.iter().enumerate() {
            if !(w.a.is_finite() && w.b.is_finite()) || w.length() <= MIN_SEGMENT_LENGTH {
                errors.push(format!("wall {i} is degenerate or not finite"));
            }
        }
        for (i, c) in self.circles.iter().enumerate() {
            if !(c.center.is_finite() && c.radius.is_finite() && c.radius > 0.0) {
                errors.push(format!("circle {i} needs a finite center and radius > 0"));
            }
        }
        for (i, r) in self.rects.iter().enumerate() {
            if !(r.min.is_finite() && r.max.is_finite() && r.min.x < r.max.x && r.min.y < r.max.y) {
                errors.push(format!("rect {i} needs xmin < xmax and ymin < ymax"));
            }
        }
        if !(self.goal.center.is_finite() && self.goal.radius.is_finite() && self.goal.radius > 0.0)
        {
            errors.push("goal needs a finite center and radius > 0".to_string());
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !(w.center.is_finite() && w.radius.is_finite() && w.radius > 0.0) {
                errors.push(format!("waypoint {i} needs a finite center and radius > 0"));
            }
        }
        if !(self.start.position.is_finite() && self.start.heading.is_finite()) {
            errors.push("start pose is not finite".to_string());
        } else if errors.is_empty() {
            let start = self.start.position;
            if !self.is_on_track(start) {
                let d = self.route.project(start).distance;
                errors.push(format!("start is off track ({d:.3} m from route)"));
            }
            let radius = ChairParams::default().chair_radius;
            if let Some((id, d)) = self.nearest_obstacle(start) {
                if d < radius {
                    errors.push(format!(
                        "start collides with {id} (clearance {:.3} m)",
                        d - radius
                    ));
                }
            }
        }
        if errors.is_empty() && !self.is_on_track(self.goal.center) {
            errors.push("goal center lies outside the route corridor".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("level serializes")
    }
}

/// True iff the point lies within the corridor (boundary inclusive).
pub fn is_on_track(p: Vec2, level: &Level) -> bool {
    level.route.project(p).distance <= level.corridor_half_width
}

/// True iff `p` lies strictly inside the goal circle.
pub fn goal_reached(p: Vec2, level: &Level) -> bool {
    level.goal.contains_strict(p)
}

/// Parses and validates a level document.
pub fn load_level(bytes: &[u8]) -> Result<Level, LevelError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LevelError::Parse {
        path: ".".into(),
        line: 0,
        column: 0,
        message: format!("level file is not UTF-8: {e}"),
    })?;
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: LevelDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        LevelError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| LevelError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Level::try_from(doc)
}

/// On-disk representation of a [`Level`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelDoc {
    pub id: String,
    #[serde(default)]
    pub walls: Vec<[f64; 4]>,
    #[serde(default)]
    pub circles: Vec<[f64; 3]>,
    #[serde(default)]
    pub rects: Vec<[f64; 4]>,
    pub route: Vec<[f64; 2]>,
    pub corridor_half_width: f64,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    #[serde(default)]
    pub waypoints: Vec<[f64; 3]>,
    pub palette: Palette,
    #[serde(default)]
    pub decoration_count: u32,
}

fn circle_from(c: [f64; 3]) -> Circle {
    Circle::new(Vec2::new(c[0], c[1]), c[2])
}

fn circle_to(c: &Circle) -> [f64; 3] {
    [c.center.x, c.center.y, c.radius]
}

impl TryFrom<LevelDoc> for Level {
    type Error = LevelError;

    fn try_from(doc: LevelDoc) -> Result<Self, Self::Error> {
        let route = Route::new(doc.route.iter().map(|v| Vec2::new(v[0], v[1])).collect())
            .map_err(|e| LevelError::Validation(vec![e]))?;
        let level = Level {
            id: doc.id,
            walls: doc
                .walls
                .iter()
                .map(|w| Segment::new(Vec2::new(w[0], w[1]), Vec2::new(w[2], w[3])))
                .collect(),
            circles: doc.circles.into_iter().map(circle_from).collect(),
            rects: doc
                .rects
                .iter()
                .map(|r| Rect::new(Vec2::new(r[0], r[1]), Vec2::new(r[2], r[3])))
                .collect(),
            route,
            corridor_half_width: doc.corridor_half_width,
            start: Pose {
                position: Vec2::new(doc.start[0], doc.start[1]),
                heading: doc.start[2],
            },
            goal: circle_from(doc.goal),
            waypoints: doc.waypoints.into_iter().map(circle_from).collect(),
            palette: doc.palette,
            decoration_count: doc.decoration_count,
        };
        level.validate().map_err(LevelError::Validation)?;
        Ok(level)
    }
}

impl From<Level> for LevelDoc {
    fn from(level: Level) -> Self {
        LevelDoc {
            id: level.id,
            walls: level
                .walls
                .iter()
                .map(|w| [w.a.x, w.a.y, w.b.x, w.b.y])
                .collect(),
            circles: level.circles.iter().map(circle_to).collect(),
            rects: level
                .rects
                .iter()
                .map(|r| [r.min.x, r.min.y, r.max.x, r.max.y])
                .collect(),
            route: level.route.vertices().iter().map(|v| [v.x, v.y]).collect(),
            corridor_half_width: level.corridor_half_width,
            start: [
                level.start.position.x,
                level.start.position.y,
                level.start.heading,
            ],
            goal: circle_to(&level.goal),
            waypoints: level.waypoints.iter().map(circle_to).collect(),
            palette: level.palette,
            decoration_count: level.decoration_count,
        }
    }
}

// ---------------------------------------------------------------------------
// Accessibility
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessibilityRules {
    /// Maximum number of decorative elements.
    pub clutter_budget: u32,
    /// Minimum contrast ratio against the background.
    pub min_contrast: f64,
}

impl Default for AccessibilityRules {
    fn default() -> Self {
        Self {
            clutter_budget: 5,
            min_contrast: 4.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AccessibilityViolation {
    Clutter {
        count: u32,
        budget: u32,
    },
    Contrast {
        element: &'static str,
        foreground: Rgb,
        background: Rgb,
        ratio: f64,
        minimum: f64,
    },
}

impl fmt::Display for AccessibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessibilityViolation::Clutter { count, budget } => {
                write!(f, "clutter: {count} decorative elements exceed the budget of {budget}")
            }
            AccessibilityViolation::Contrast { element, foreground, background, ratio, minimum } => write!(
                f,
                "contrast: {element} {foreground} on background {background} has ratio {ratio:.2} < {minimum}"
            ),
        }
    }
}

fn linearize(channel: u8) -> f64 {
    let c = f64::from(channel) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Relative luminance of an sRGB color, in `[0, 1]`.
pub fn relative_luminance(color: Rgb) -> f64 {
    0.2126 * linearize(color.0) + 0.7152 * linearize(color.1) + 0.0722 * linearize(color.2)
}

/// `(L_lighter + 0.05) / (L_darker + 0.05)`; symmetric, in `[1, 21]`.
pub fn contrast_ratio(a: Rgb, b: Rgb) -> f64 {
    let (la, lb) = (relative_luminance(a), relative_luminance(b));
    let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
    (hi + 0.05) / (lo + 0.05)
}

pub fn validate_accessibility(
    level: &Level,
    rules: &AccessibilityRules,
) -> Vec<AccessibilityViolation> {
    let mut violations = Vec::new();
    if level.decoration_count > rules.clutter_budget {
        violations.push(AccessibilityViolation::Clutter {
            count: level.decoration_count,
            budget: rules.clutter_budget,
        });
    }
    let p = &level.palette;
    for (element, color) in [("chair", p.chair), ("route", p.route), ("reward", p.reward)] {
        let ratio = contrast_ratio(color, p.background);
        if ratio < rules.min_contrast {
            violations.push(AccessibilityViolation::Contrast {
                element,
                foreground: color,
                background: p.background,
                ratio,
                minimum: rules.min_contrast,
            });
        }
    }
    violations
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub const STRAIGHT: &str = r##"{
        "id": "unit_straight",
        "walls": [[-0.5, -1.5, 12.5, -1.5], [-0.5, 1.5, 12.5, 1.5], [-0.5, -1.5, -0.5, 1.5], [12.5, -1.5, 12.5, 1.5]],
        "route": [[0, 0], [12, 0]],
        "corridor_half_width": 0.75,
        "start": [1, 0, 0],
        "goal": [10, 0, 0.8],
        "waypoints": [[5, 0, 0.6]],
        "palette": {"background": "#FFFFFF", "route": "#1A1A1A", "chair": "#0033CC", "obstacle": "#000000", "reward": "#8A4B00"},
        "decoration_count": 1
    }"##;
}

//! Car-like robot in a planar workspace labeled by rectangular regions.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::Valuation;
use crate::ltl::{is_valid_atom_name, AlphabetSymbol};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot read workspace {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid workspace JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dt must be positive, got {0}")]
    BadDt(f64),
    #[error("bounds must satisfy lo < hi")]
    BadBounds,
    #[error("region {0:?}: name is not a valid proposition")]
    BadName(String),
    #[error("region {0:?}: rectangle must satisfy lo < hi")]
    DegenerateRegion(String),
    #[error("region {0:?} extends outside the workspace")]
    OutsideBounds(String),
    #[error("regions {0:?} and {1:?} overlap (set allow_overlap to permit)")]
    Overlap(String, String),
    #[error("distance to an empty region set")]
    EmptyRegionSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl CarState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        CarState { x, y, theta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarAction {
    pub v: f64,
    pub phi: f64,
}

impl CarAction {
    pub fn new(v: f64, phi: f64) -> Self {
        CarAction { v, phi }
    }

    /// Both components clipped to [-1, 1]. NaN maps to 0.
    pub fn clipped(self) -> Self {
        let c = |u: f64| if u.is_nan() { 0.0 } else { u.clamp(-1.0, 1.0) };
        CarAction { v: c(self.v), phi: c(self.phi) }
    }
}

/// Closed axis-aligned rectangle, serialized as `[x_lo, x_hi, y_lo, y_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl From<[f64; 4]> for Rect {
    fn from([x_lo, x_hi, y_lo, y_hi]: [f64; 4]) -> Self {
        Rect { x_lo, x_hi, y_lo, y_hi }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x_lo, r.x_hi, r.y_lo, r.y_hi]
    }
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Rect { x_lo, x_hi, y_lo, y_hi }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_lo <= x && x <= self.x_hi && self.y_lo <= y && y <= self.y_hi
    }

    /// Euclidean distance from a point; 0 inside.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x_lo - x).max(0.0).max(x - self.x_hi);
        let dy = (self.y_lo - y).max(0.0).max(y - self.y_hi);
        dx.hypot(dy)
    }

    fn interiors_overlap(&self, o: &Rect) -> bool {
        self.x_lo < o.x_hi && o.x_lo < self.x_hi && self.y_lo < o.y_hi && o.y_lo < self.y_hi
    }

    fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub rect: Rect,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub theta: [f64; 2],
}

impl Bounds {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x[0], self.x[1], self.y[0], self.y[1])
    }

    /// Largest planar distance between two points of the box.
    pub fn diagonal(&self) -> f64 {
        (self.x[1] - self.x[0]).hypot(self.y[1] - self.y[0])
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { x: [-5.0, 5.0], y: [-5.0, 5.0], theta: [-PI, PI] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub bounds: Bounds,
    pub dt: f64,
    pub regions: Vec<Region>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_overlap: bool,
}

impl Workspace {
    pub fn new(bounds: Bounds, dt: f64, regions: Vec<Region>) -> Result<Self, EnvError> {
        let w = Workspace { bounds, dt, regions, allow_overlap: false };
        w.validate()?;
        Ok(w)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let w: Workspace = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| EnvError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EnvError::BadDt(self.dt));
        }
        let b = &self.bounds;
        if !(b.x[0] < b.x[1] && b.y[0] < b.y[1] && b.theta[0] < b.theta[1]) {
            return Err(EnvError::BadBounds);
        }
        let outer = b.rect();
        for r in &self.regions {
            if !is_valid_atom_name(&r.name) {
                return Err(EnvError::BadName(r.name.clone()));
            }
            let q = &r.rect;
            if !(q.x_lo < q.x_hi && q.y_lo < q.y_hi) {
                return Err(EnvError::DegenerateRegion(r.name.clone()));
            }
            if q.x_lo < outer.x_lo || q.x_hi > outer.x_hi || q.y_lo < outer.y_lo || q.y_hi > outer.y_hi {
                return Err(EnvError::OutsideBounds(r.name.clone()));
            }
        }
        if !self.allow_overlap {
            for (i, r) in self.regions.iter().enumerate() {
                for o in &self.regions[i + 1..] {
                    if r.rect.interiors_overlap(&o.rect) {
                        return Err(EnvError::Overlap(r.name.clone(), o.name.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn step(&self, s: CarState, a: CarAction) -> CarState {
        step_dynamics(s, a, self.dt, &self.bounds)
    }

    pub fn label(&self, s: &CarState) -> AlphabetSymbol {
        label(self, s)
    }
}

/// Steering slip angle `atan(tan φ) / 2`.
pub fn slip_gamma(phi: f64) -> f64 {
    phi.tan().atan() / 2.0
}

/// Time derivative `(ẋ, ẏ, θ̇)` of the car model; `a` is used as given.
pub fn car_derivative(s: &CarState, a: &CarAction) -> [f64; 3] {
    let g = slip_gamma(a.phi);
    [
        a.v * (g + s.theta).cos() / g.cos(),
        a.v * (g + s.theta).sin() / g.cos(),
        a.v * a.phi.tan(),
    ]
}

/// Maps an angle into [-π, π); angles already in range are returned unchanged.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on 2π after rounding
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// One forward-Euler step with clipped controls, wrapped heading and
/// position clamped to the workspace box.
pub fn step_dynamics(s: CarState, a: CarAction, dt: f64, bounds: &Bounds) -> CarState {
    let a = a.clipped();
    let [dx, dy, dth] = car_derivative(&s, &a);
    CarState {
        x: (s.x + dt * dx).clamp(bounds.x[0], bounds.x[1]),
        y: (s.y + dt * dy).clamp(bounds.y[0], bounds.y[1]),
        theta: wrap_angle(s.theta + dt * dth),
    }
}

/// Names of the regions containing the position (closed rectangles).
pub fn label(w: &Workspace, s: &CarState) -> AlphabetSymbol {
    w.regions.iter().filter(|r| r.rect.contains(s.x, s.y)).map(|r| r.name.clone()).collect()
}

/// Minimum planar distance to any of the rectangles.
pub fn distance_to_regions(s: &CarState, rs: &[Rect]) -> Result<f64, EnvError> {
    rs.iter().map(|r| r.distance(s.x, s.y)).reduce(f64::min).ok_or(EnvError::EmptyRegionSet)
}

/// A cell of the region arrangement: a closed rectangle (possibly a segment
/// or a point) on which the label is constant over its relative interior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub rect: Rect,
    pub label: Valuation,
}

/// Labels positions as valuations over an automaton's proposition list and
/// enumerates the arrangement of region boundaries. Regions whose name is not
/// a proposition of the automaton do not contribute to valuations.
#[derive(Clone, Debug)]
pub struct Labeler {
    regions: Vec<(Rect, Option<usize>)>,
    cells: Vec<Cell>,
    d_max: f64,
}

impl Labeler {
    pub fn new(w: &Workspace, ap: &[String]) -> Self {
        let regions: Vec<(Rect, Option<usize>)> =
            w.regions.iter().map(|r| (r.rect, ap.iter().position(|p| *p == r.name))).collect();
        let outer = w.bounds.rect();
        let axis = |lo: f64, hi: f64, f: &dyn Fn(&Rect) -> [f64; 2]| {
            let mut c: Vec<f64> = vec![lo, hi];
            for (r, _) in &regions {
                c.extend(f(r));
            }
            c.sort_by(f64::total_cmp);
            c.dedup();
            // points and the closed intervals between them
            let mut pieces = Vec::new();
            for (k, &p) in c.iter().enumerate() {
                pieces.push([p, p]);
                if let Some(&n) = c.get(k + 1) {
                    pieces.push([p, n]);
                }
            }
            pieces
        };
        let xs = axis(outer.x_lo, outer.x_hi, &|r| [r.x_lo, r.x_hi]);
        let ys = axis(outer.y_lo, outer.y_hi, &|r| [r.y_lo, r.y_hi]);
        let mut labeler = Labeler { regions, cells: Vec::new(), d_max: w.bounds.diagonal() };
        for x in &xs {
            for y in &ys {
                let rect = Rect::new(x[0], x[1], y[0], y[1]);
                let (cx, cy) = rect.center();
                labeler.cells.push(Cell { rect, label: labeler.valuation(cx, cy) });
            }
        }
        labeler
    }

    pub fn valuation(&self, x: f64, y: f64) -> Valuation {
        self.regions.iter().fold(Valuation::EMPTY, |v, (r, bit)| match bit {
            Some(i) if r.contains(x, y) => v.with(*i),
            _ => v,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Every valuation produced by some point of the workspace, sorted.
    pub fn realizable(&self) -> Vec<Valuation> {
        let mut v: Vec<Valuation> = self.cells.iter().map(|c| c.label).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Cells whose label satisfies `pred`.
    pub fn cells_where(&self, pred: impl Fn(Valuation) -> bool) -> Vec<Rect> {
        self.cells.iter().filter(|c| pred(c.label)).map(|c| c.rect).collect()
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> Workspace {
        Workspace::new(
            Bounds::default(),
            0.1,
            vec![
                Region { name: "a".into(), rect: Rect::new(-3.5, -2.0, -3.5, -2.0) },
                Region { name: "b".into(), rect: Rect::new(2.0, 3.5, 2.0, 3.5) },
            ],
        )
        .unwrap()
    }

    fn rk4(s: CarState, a: CarAction, t: f64, h: f64) -> CarState {
        let n = (t / h).round() as usize;
        let add = |s: &CarState, k: &[f64; 3], c: f64| CarState::new(s.x + c * k[0], s.y + c * k[1], s.theta + c * k[2]);
        let mut s = s;
        for _ in 0..n {
            let k1 = car_derivative(&s, &a);
            let k2 = car_derivative(&add(&s, &k1, h / 2.0), &a);
            let k3 = car_derivative(&add(&s, &k2, h / 2.0), &a);
            let k4 = car_derivative(&add(&s, &k3, h), &a);
            let mut out = [0.0; 3];
            for i in 0..3 {
                out[i] = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s = add(&s, &out, 1.0);
        }
        s
    }

    #[test]
    fn straight_line_steps() {
        let b = Bounds::default();
        let s = step_dynamics(CarState::new(0.0, 0.0, 0.0), CarAction::new(1.0, 0.0), 0.1, &b);
        assert_eq!(s, CarState::new(0.1, 0.0, 0.0));
        let s = step_dynamics(CarState::new(0.0, 0.0, PI / 2.0), CarAction::new(1.0, 0.0), 0.1, &b);
        assert!(s.x.abs() < 1e-16 && (s.y - 0.1).abs() < 1e-16 && s.theta == PI / 2.0);
    }

    #[test]
    fn steering_step_is_close_to_rk4() {
        let s0 = CarState::new(0.0, 0.0, 0.0);
        let a = CarAction::new(1.0, 0.5);
        let euler = step_dynamics(s0, a, 0.1, &Bounds::default());
        let exact = rk4(s0, a, 0.1, 1e-4);
        // local error of one Euler step is O(dt^2 · |f'|)
        for (e, x) in [(euler.x, exact.x), (euler.y, exact.y), (euler.theta, exact.theta)] {
            assert!((e - x).abs() < 0.1 * 0.1, "{e} vs {x}");
        }
        assert!((euler.theta - 0.1 * 0.5f64.tan()).abs() < 1e-15);
    }

    #[test]
    fn controls_are_clipped_and_walls_clamp() {
        let b = Bounds::default();
        let s = step_dynamics(CarState::new(4.95, 0.0, 0.0), CarAction::new(7.0, 0.0), 0.1, &b);
        assert_eq!(s.x, 5.0);
        let t = step_dynamics(CarState::new(0.0, 0.0, 0.0), CarAction::new(-3.0, 0.0), 0.1, &b);
        assert_eq!(t.x, -0.1);
    }

    #[test]
    fn opposite_steering_restores_heading() {
        let b = Bounds::default();
        let s0 = CarState::new(0.0, 0.0, 3.1);
        let s1 = step_dynamics(s0, CarAction::new(1.0, 0.8), 0.1, &b);
        assert!(s1.theta < 0.0, "wrapped past π");
        let s2 = step_dynamics(s1, CarAction::new(1.0, -0.8), 0.1, &b);
        assert!((s2.theta - s0.theta).abs() < 1e-12);
    }

    #[test]
    fn labels_are_closed_sets() {
        let w = example1();
        assert_eq!(label(&w, &CarState::new(-3.0, -3.0, 0.0)).to_string(), "{a}");
        assert!(label(&w, &CarState::new(0.0, 0.0, 0.0)).0.is_empty());
        assert_eq!(label(&w, &CarState::new(-3.5, -3.0, 0.0)).to_string(), "{a}");
    }

    #[test]
    fn distances() {
        let s = CarState::new(0.0, 0.0, 0.0);
        let b = Rect::new(2.0, 3.5, 2.0, 3.5);
        assert!((distance_to_regions(&s, &[b]).unwrap() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(distance_to_regions(&CarState::new(3.0, 3.0, 0.0), &[b]).unwrap(), 0.0);
        let near = Rect::new(1.0, 2.0, -1.0, 1.0);
        let far = Rect::new(-4.0, -3.0, -1.0, 1.0);
        assert_eq!(distance_to_regions(&s, &[far, near]).unwrap(), 1.0);
        assert!(matches!(distance_to_regions(&s, &[]), Err(EnvError::EmptyRegionSet)));
    }

    #[test]
    fn workspace_validation() {
        let r = |n: &str, rect| Region { name: n.into(), rect };
        let overlapping = vec![r("b", Rect::new(-4.0, -3.0, 1.0, 2.0)), r("c", Rect::new(-4.5, -2.5, 0.0, 3.0))];
        assert!(matches!(
            Workspace::new(Bounds::default(), 0.1, overlapping.clone()),
            Err(EnvError::Overlap(..))
        ));
        let w = Workspace { bounds: Bounds::default(), dt: 0.1, regions: overlapping, allow_overlap: true };
        assert!(w.validate().is_ok());
        assert!(matches!(Workspace::new(Bounds::default(), 0.0, vec![]), Err(EnvError::BadDt(_))));
        let outside = vec![r("a", Rect::new(4.0, 6.0, 0.0, 1.0))];
        assert!(matches!(Workspace::new(Bounds::default(), 0.1, outside), Err(EnvError::OutsideBounds(_))));
        assert!(matches!(
            Workspace::new(Bounds::default(), 0.1, vec![r("A", Rect::new(0.0, 1.0, 0.0, 1.0))]),
            Err(EnvError::BadName(_))
        ));
        // regions sharing an edge are not overlapping
        let touching = vec![r("a", Rect::new(0.0, 1.0, 0.0, 1.0)), r("b", Rect::new(1.0, 2.0, 0.0, 1.0))];
        assert!(Workspace::new(Bounds::default(), 0.1, touching).is_ok());
    }

    #[test]
    fn json_schema() {
        let text = r#"{"bounds":{"x":[-5,5],"y":[-5,5],"theta":[-3.141592653589793,3.141592653589793]},
            "dt":0.1,"regions":[{"name":"a","rect":[-3.5,-2,-3.5,-2]}]}"#;
        let w = Workspace::from_json(text).unwrap();
        assert_eq!(w.regions[0].rect, Rect::new(-3.5, -2.0, -3.5, -2.0));
        assert!(!w.allow_overlap);
        let back = Workspace::from_json(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn arrangement_realizes_touching_and_nested_labels() {
        let ap: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let touching = Workspace::new(
            Bounds::default(),
            0.1,
            vec![
                Region { name: "a".into(), rect: Rect::new(0.0, 1.0, 0.0, 1.0) },
                Region { name: "b".into(), rect: Rect::new(1.0, 2.0, 0.0, 1.0) },
            ],
        )
        .unwrap();
        let l = Labeler::new(&touching, &ap);
        assert_eq!(l.realizable(), vec![Valuation(0), Valuation(1), Valuation(2), Valuation(3)]);
        let nested = Workspace {
            bounds: Bounds::default(),
            dt: 0.1,
            regions: vec![
                Region { name: "b".into(), rect: Rect::new(-4.0, -3.0, 1.0, 2.0) },
                Region { name: "c".into(), rect: Rect::new(-4.5, -2.5, 0.0, 3.0) },
            ],
            allow_overlap: true,
        };
        let l = Labeler::new(&nested, &ap);
        // b never occurs without c
        assert_eq!(l.realizable(), vec![Valuation(0), Valuation(4), Valuation(6)]);
    }

    #[test]
    fn cell_distance_matches_region_distance() {
        let w = example1();
        let ap = vec!["a".to_string(), "b".to_string()];
        let l = Labeler::new(&w, &ap);
        let cells = l.cells_where(|v| v.has(0));
        let s = CarState::new(0.7, -1.3, 0.0);
        let d_cells = distance_to_regions(&s, &cells).unwrap();
        let d_region = distance_to_regions(&s, &[w.regions[0].rect]).unwrap();
        assert!((d_cells - d_region).abs() < 1e-12);
        assert!((l.d_max() - 200f64.sqrt()).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn zero_steering_keeps_heading(x in -4.0..4.0f64, y in -4.0..4.0f64, th in -3.1..3.1f64, v in -1.0..1.0f64) {
                let s = step_dynamics(CarState::new(x, y, th), CarAction::new(v, 0.0), 0.1, &Bounds::default());
                prop_assert_eq!(s.theta, th);
                prop_assert!(((s.x - x).hypot(s.y - y) - v.abs() * 0.1).abs() < 1e-12);
            }

            #[test]
            fn distance_matches_dense_grid(px in -5.0..5.0f64, py in -5.0..5.0f64,
                                           x0 in -5.0..4.0f64, w in 0.1..1.0f64, y0 in -5.0..4.0f64, h in 0.1..1.0f64) {
                let r = Rect::new(x0, x0 + w, y0, y0 + h);
                let mut best = f64::INFINITY;
                let (nx, ny) = ((w / 0.01).ceil() as usize, (h / 0.01).ceil() as usize);
                for i in 0..=nx {
                    for j in 0..=ny {
                        let gx = (x0 + i as f64 * 0.01).min(r.x_hi);
                        let gy = (y0 + j as f64 * 0.01).min(r.y_hi);
                        best = best.min((gx - px).hypot(gy - py));
                    }
                }
                let d = r.distance(px, py);
                prop_assert!(d <= best + 1e-12 && best - d < 0.02);
            }

            #[test]
            fn label_implies_zero_distance(px in -5.0..5.0f64, py in -5.0..5.0f64) {
                let w = example1();
                let s = CarState::new(px, py, 0.0);
                for r in &w.regions {
                    if label(&w, &s).0.contains(&r.name) {
                        prop_assert_eq!(distance_to_regions(&s, &[r.rect]).unwrap(), 0.0);
                    }
                }
            }
        }
    }
}

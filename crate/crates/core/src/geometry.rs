//! Module placement for the seven tetromino morphologies.
//!
//! Module centers are placed on a square grid with pitch `l` and then
//! translated so that their mean is the body-frame origin. Every
//! coordinate is a multiple of `l/4`, so the placement is exact in binary
//! floating point for the default side length.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;

/// Number of locomotion modules.
pub const MODULES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("geometric parameter `{0}` must be strictly positive and finite, got {1}")]
    NotPositive(&'static str, f64),
    #[error("wheel offset d = {d} must be smaller than half the module side l/2 = {half}")]
    WheelOutsideModule { d: f64, half: f64 },
    #[error("unknown shape `{0}`, expected one of I, L, Z, O, T, S, J")]
    UnknownShape(String),
}

/// Physical dimensions shared by all modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    /// Wheel radius (m).
    pub wheel_radius: f64,
    /// Distance from each wheel to the steering axis (m).
    pub wheel_offset: f64,
    /// Side length of a square module (m).
    pub module_length: f64,
}

impl GeometricParams {
    pub fn new(
        wheel_radius: f64,
        wheel_offset: f64,
        module_length: f64,
    ) -> Result<Self, GeometryError> {
        let params = Self {
            wheel_radius,
            wheel_offset,
            module_length,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, value) in [
            ("r_w", self.wheel_radius),
            ("d", self.wheel_offset),
            ("l", self.module_length),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::NotPositive(name, value));
            }
        }
        let half = self.module_length / 2.0;
        if self.wheel_offset >= half {
            return Err(GeometryError::WheelOutsideModule {
                d: self.wheel_offset,
                half,
            });
        }
        Ok(())
    }
}

impl Default for GeometricParams {
    fn default() -> Self {
        Self {
            wheel_radius: 0.03,
            wheel_offset: 0.05,
            module_length: 0.25,
        }
    }
}

/// The seven tetromino configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    I,
    L,
    Z,
    O,
    T,
    S,
    J,
}

impl Shape {
    pub const ALL: [Shape; 7] = [
        Shape::I,
        Shape::L,
        Shape::Z,
        Shape::O,
        Shape::T,
        Shape::S,
        Shape::J,
    ];

    pub fn letter(self) -> char {
        match self {
            Shape::I => 'I',
            Shape::L => 'L',
            Shape::Z => 'Z',
            Shape::O => 'O',
            Shape::T => 'T',
            Shape::S => 'S',
            Shape::J => 'J',
        }
    }

    /// Grid cells `(column, row)` of modules 1..4, in chain order.
    fn cells(self) -> [(i32, i32); MODULES] {
        match self {
            Shape::I => [(0, 3), (0, 2), (0, 1), (0, 0)],
            Shape::L => [(0, 2), (0, 1), (0, 0), (1, 0)],
            Shape::Z => [(0, 1), (1, 1), (1, 0), (2, 0)],
            Shape::O => [(1, 1), (1, 0), (0, 0), (0, 1)],
            Shape::T => [(1, 2), (0, 1), (1, 1), (1, 0)],
            Shape::S => [(1, 1), (2, 1), (1, 0), (0, 0)],
            Shape::J => [(1, 1), (0, 1), (0, 0), (0, -1)],
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Shape {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" => Ok(Shape::I),
            "L" => Ok(Shape::L),
            "Z" => Ok(Shape::Z),
            "O" => Ok(Shape::O),
            "T" => Ok(Shape::T),
            "S" => Ok(Shape::S),
            "J" => Ok(Shape::J),
            _ => Err(GeometryError::UnknownShape(s.to_string())),
        }
    }
}

/// A fixed robot configuration: module steering-axis positions and chassis
/// orientations in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Morphology {
    pub shape: Shape,
    pub params: GeometricParams,
    /// Steering-axis positions `(x^c_i, y^c_i)`; their mean is the origin.
    pub centers: [Vector2<f64>; MODULES],
    /// Chassis rotation of each module relative to module 2 (rad).
    ///
    /// Module 2 is the reference chassis, so `hinge_offsets[1] == 0`.
    /// Module 4 carries the sum of the second and third hinge angles.
    pub hinge_offsets: [f64; MODULES],
}

/// Builds the module layout for `shape`.
pub fn build_morphology(shape: Shape, params: GeometricParams) -> Morphology {
    let cells = shape.cells();
    let sum = cells
        .iter()
        .fold((0, 0), |acc, &(c, r)| (acc.0 + c, acc.1 + r));
    // Quarter-cell units keep the centering exact.
    let quarter = params.module_length / 4.0;
    let centers = cells.map(|(c, r)| {
        Vector2::new(
            f64::from(4 * c - sum.0) * quarter,
            f64::from(4 * r - sum.1) * quarter,
        )
    });
    let hinge_offsets = hinge_offsets(&cells);
    Morphology {
        shape,
        params,
        centers,
        hinge_offsets,
    }
}

/// Chassis rotations implied by folding the chain 1-2-3-4.
///
/// In the straight (I) configuration every link points along -y and all
/// offsets vanish. A straight continuation keeps the chassis orientation,
/// an edge-adjacent turn rotates it by the turn angle, and a corner-sharing
/// (diagonal) link rotates it by a quarter turn towards the link.
fn hinge_offsets(cells: &[(i32, i32); MODULES]) -> [f64; MODULES] {
    let link = |a: usize, b: usize| {
        Vector2::new(
            f64::from(cells[b].0 - cells[a].0),
            f64::from(cells[b].1 - cells[a].1),
        )
    };
    let reference = Vector2::new(0.0, -1.0);
    let hinge1 = fold_step(&reference, &link(0, 1));
    let hinge2 = fold_step(&reference, &link(1, 2));
    let hinge3 = fold_step(&link(1, 2), &link(2, 3));
    [
        angle::wrap(hinge1),
        0.0,
        angle::wrap(hinge2),
        angle::wrap(hinge2 + hinge3),
    ]
}

fn fold_step(from: &Vector2<f64>, to: &Vector2<f64>) -> f64 {
    let turn = (from.x * to.y - from.y * to.x).atan2(from.dot(to));
    let magnitude = turn.abs();
    let diagonal = (magnitude - FRAC_PI_4).abs() < 1e-9 || (magnitude - 3.0 * FRAC_PI_4).abs() < 1e-9;
    if diagonal {
        turn.signum() * FRAC_PI_2
    } else {
        (turn / FRAC_PI_2).round() * FRAC_PI_2
    }
}

impl Morphology {
    pub fn new(shape: Shape, params: GeometricParams) -> Self {
        build_morphology(shape, params)
    }

    /// Heading of module `i`'s wheels in the body frame for steering angle
    /// `steer` (`i` is zero based).
    pub fn heading(&self, i: usize, steer: f64) -> f64 {
        steer + self.hinge_offsets[i]
    }

    /// Steering angle that realizes body-frame `heading` on module `i`.
    pub fn steer_for_heading(&self, i: usize, heading: f64) -> f64 {
        angle::wrap(heading - self.hinge_offsets[i])
    }

    /// Sum of squared module distances from the centroid.
    pub fn polar_inertia(&self) -> f64 {
        self.centers.iter().map(|c| c.norm_squared()).sum()
    }

    pub fn centroid(&self) -> Vector2<f64> {
        self.centers.iter().sum::<Vector2<f64>>() / MODULES as f64
    }

    /// Homogeneous coordinates `(x, y, 1)` of module `i`.
    pub fn center_h(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.centers[i].x, self.centers[i].y, 1.0)
    }
}

/// The line through a module's steering axis perpendicular to its wheel
/// plane, stored as `normal . p = offset` with a unit normal.
///
/// The normal points along the wheel heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelAxisLine {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

impl WheelAxisLine {
    /// Homogeneous coefficients `l` with `l . (x, y, 1) = 0` on the line.
    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.normal.x, self.normal.y, -self.offset)
    }

    /// Signed distance of `p` from the line.
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Unit direction of the line (the heading rotated by +90 degrees).
    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(-self.normal.y, self.normal.x)
    }
}

/// Wheel axis line of module `i` (zero based) at steering angle `steer`.
pub fn wheel_axis_line(morph: &Morphology, i: usize, steer: f64) -> WheelAxisLine {
    let heading = morph.heading(i, steer);
    let normal = Vector2::new(heading.cos(), heading.sin());
    WheelAxisLine {
        normal,
        offset: normal.dot(&morph.centers[i]),
    }
}

/// Half the spread of the module centers measured across the driving
/// direction `gamma`.
///
/// This is the track width of the equivalent two-wheel differential drive.
/// When every module lies on one line along `gamma` the spread vanishes and
/// the module's own wheel offset is returned instead.
pub fn equivalent_track(morph: &Morphology, gamma: f64) -> f64 {
    let (s, c) = gamma.sin_cos();
    let (lo, hi) = morph
        .centers
        .iter()
        .map(|p| -p.x * s + p.y * c)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let half = (hi - lo) / 2.0;
    if half <= 1e-12 * morph.params.module_length {
        morph.params.wheel_offset
    } else {
        half
    }
}

/// Coordinate axis a placement relation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A homogeneous linear relation `sum_i coeffs[i] * coord_i = 0` among the
/// module coordinates along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementRelation {
    pub axis: Axis,
    pub coeffs: [f64; MODULES],
}

impl PlacementRelation {
    pub fn residual(&self, morph: &Morphology) -> f64 {
        morph
            .centers
            .iter()
            .zip(self.coeffs.iter())
            .map(|(p, k)| {
                k * match self.axis {
                    Axis::X => p.x,
                    Axis::Y => p.y,
                }
            })
            .sum()
    }
}

/// Expands `f_a c_a = f_b c_b = ...` into pairwise relations.
fn chain(axis: Axis, terms: &[(usize, f64)]) -> Vec<PlacementRelation> {
    terms
        .windows(2)
        .map(|w| {
            let mut coeffs = [0.0; MODULES];
            coeffs[w[0].0] += w[0].1;
            coeffs[w[1].0] -= w[1].1;
            PlacementRelation { axis, coeffs }
        })
        .collect()
}

fn zero(axis: Axis, i: usize) -> PlacementRelation {
    let mut coeffs = [0.0; MODULES];
    coeffs[i] = 1.0;
    PlacementRelation { axis, coeffs }
}

/// Coordinate relations that characterize each placement.
///
/// For I, O and S these are the classic tetromino relations. The L, J, Z
/// and T rows are the ones implied by the centroid-centered grid placement.
pub fn placement_relations(shape: Shape) -> Vec<PlacementRelation> {
    use Axis::{X, Y};
    let mut out = Vec::new();
    match shape {
        Shape::I => {
            out.extend((0..MODULES).map(|i| zero(X, i)));
            out.extend(chain(Y, &[(0, 1.0), (1, 3.0), (2, -3.0), (3, -1.0)]));
        }
        Shape::L => {
            out.extend(chain(X, &[(0, 3.0), (1, 3.0), (2, 3.0), (3, -1.0)]));
            out.extend(chain(Y, &[(0, 1.0), (1, 5.0), (2, -5.0 / 3.0), (3, -5.0 / 3.0)]));
        }
        Shape::Z => {
            out.push(zero(X, 1));
            out.push(zero(X, 2));
            out.extend(chain(X, &[(0, 1.0), (3, -1.0)]));
            out.extend(chain(Y, &[(0, 1.0), (1, 1.0), (2, -1.0), (3, -1.0)]));
        }
        Shape::O => {
            out.extend(chain(X, &[(0, 1.0), (1, 1.0), (2, -1.0), (3, -1.0)]));
            out.extend(chain(Y, &[(0, 1.0), (1, -1.0), (2, -1.0), (3, 1.0)]));
        }
        Shape::T => {
            out.extend(chain(X, &[(0, -3.0), (1, 1.0), (2, -3.0), (3, -3.0)]));
            out.extend(chain(Y, &[(0, 1.0), (3, -1.0)]));
            out.push(zero(Y, 1));
            out.push(zero(Y, 2));
        }
        Shape::S => {
            out.push(zero(X, 0));
            out.push(zero(X, 2));
            out.extend(chain(X, &[(1, 1.0), (3, -1.0)]));
            out.extend(chain(Y, &[(0, 1.0), (1, 1.0), (2, -1.0), (3, -1.0)]));
        }
        Shape::J => {
            out.extend(chain(X, &[(0, -1.0), (1, 3.0), (2, 3.0), (3, 3.0)]));
            out.extend(chain(Y, &[(0, 1.0), (1, 1.0), (2, -3.0), (3, -3.0 / 5.0)]));
        }
    }
    out
}

/// Largest absolute residual of the placement relations for `morph`.
pub fn placement_residual(morph: &Morphology) -> f64 {
    placement_relations(morph.shape)
        .iter()
        .map(|r| r.residual(morph).abs())
        .fold(0.0, f64::max)
}

/// Whether modules `a` and `b` share an edge (`l` apart) or a corner
/// (`l * sqrt(2)` apart).
pub fn hinged_neighbors(morph: &Morphology, a: usize, b: usize) -> bool {
    let l = morph.params.module_length;
    let dist = (morph.centers[a] - morph.centers[b]).norm();
    (dist - l).abs() < 1e-12 || (dist - l * 2f64.sqrt()).abs() < 1e-12
}

//! Fluid-flow mobility over a rectangular grid of rectangular cells.
//!
//! Users move in a straight line at constant speed and reflect off the outer
//! edges of the area. Cell-crossing times are solved exactly from the line /
//! boundary intersections; nothing is time-stepped.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::stochastic::{Distribution, RandomStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellGrid {
    pub area_width: f64,
    pub area_height: f64,
    pub cols: u32,
    pub rows: u32,
    pub cell_width: f64,
    pub cell_height: f64,
}

impl Default for CellGrid {
    fn default() -> Self {
        Self {
            area_width: 387.0,
            area_height: 552.0,
            cols: 3,
            rows: 4,
            cell_width: 129.0,
            cell_height: 138.0,
        }
    }
}

impl CellGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("area_width", self.area_width),
            ("area_height", self.area_height),
            ("cell_width", self.cell_width),
            ("cell_height", self.cell_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.cols == 0 || self.rows == 0 {
            return Err(Error::param("cols", "grid needs at least one row and one column"));
        }
        if (self.cols as f64 * self.cell_width - self.area_width).abs() > 1e-9 {
            return Err(Error::param("cell_width", "cols * cell_width must equal area_width"));
        }
        if (self.rows as f64 * self.cell_height - self.area_height).abs() > 1e-9 {
            return Err(Error::param("cell_height", "rows * cell_height must equal area_height"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        (self.cols * self.rows) as usize
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width * self.cell_height
    }

    pub fn cell_perimeter(&self) -> f64 {
        2.0 * (self.cell_width + self.cell_height)
    }

    fn index(&self, col: u32, row: u32) -> usize {
        (col + self.cols * row) as usize
    }
}

/// Position, speed and heading of one user. Heading is measured from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeKinematics {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub direction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub time: f64,
    pub ue_id: u32,
    pub from_cell: usize,
    pub to_cell: usize,
}

/// Uniform position over the area, uniform heading in `[0, 2π)`, speed from
/// `speed`.
pub fn init_user(grid: &CellGrid, speed: &Distribution, stream: &mut RandomStream) -> UeKinematics {
    let x = grid.area_width * stream.uniform();
    let y = grid.area_height * stream.uniform();
    let direction = TAU * stream.uniform();
    let speed = speed.sample(stream).max(0.0);
    UeKinematics {
        x,
        y,
        speed,
        direction,
    }
}

/// Cell containing `(x, y)`. Points on an interior boundary belong to the
/// higher-index cell.
pub fn cell_of(x: f64, y: f64, grid: &CellGrid) -> Result<usize> {
    if !(0.0..=grid.area_width).contains(&x) || !(0.0..=grid.area_height).contains(&y) {
        return Err(Error::param(
            "position",
            format!("({x}, {y}) lies outside the {}x{} area", grid.area_width, grid.area_height),
        ));
    }
    let (col, row) = column_row(x, y, grid);
    Ok(grid.index(col, row))
}

fn column_row(x: f64, y: f64, grid: &CellGrid) -> (u32, u32) {
    let col = ((x / grid.cell_width).floor() as u32).min(grid.cols - 1);
    let row = ((y / grid.cell_height).floor() as u32).min(grid.rows - 1);
    (col, row)
}

/// Mean cell-crossing rate of the fluid-flow model: `v̄·B / (π·S)`.
pub fn analytic_ccr(mean_speed: f64, perimeter: f64, area: f64) -> Result<f64> {
    for (name, v) in [("mean_speed", mean_speed), ("perimeter", perimeter), ("area", area)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
        }
    }
    Ok(mean_speed * perimeter / (PI * area))
}

/// Hits on both axes closer together than this are one corner event.
const SIMULTANEOUS_HIT_S: f64 = 1e-9;

/// Per-axis walker state: current cell index along the axis, position and
/// signed velocity.
#[derive(Debug, Clone, Copy)]
struct Axis {
    pos: f64,
    vel: f64,
    cell: u32,
    cells: u32,
    cell_len: f64,
    len: f64,
}

enum AxisHit {
    Line,
    Wall,
}

impl Axis {
    fn new(pos: f64, vel: f64, cell: u32, cells: u32, cell_len: f64, len: f64) -> Self {
        let mut axis = Self {
            pos: pos.clamp(0.0, len),
            vel,
            cell,
            cells,
            cell_len,
            len,
        };
        // On a boundary heading into the lower cell: already there.
        if vel < 0.0 && cell > 0 && axis.pos == cell as f64 * cell_len {
            axis.cell -= 1;
        }
        axis
    }

    /// Time until the next line or wall, with its kind.
    fn next_hit(&self) -> (f64, AxisHit) {
        if self.vel > 0.0 {
            let (target, hit) = if self.cell + 1 >= self.cells {
                (self.len, AxisHit::Wall)
            } else {
                ((self.cell + 1) as f64 * self.cell_len, AxisHit::Line)
            };
            (((target - self.pos) / self.vel).max(0.0), hit)
        } else if self.vel < 0.0 {
            let (target, hit) = if self.cell == 0 {
                (0.0, AxisHit::Wall)
            } else {
                (self.cell as f64 * self.cell_len, AxisHit::Line)
            };
            (((target - self.pos) / self.vel).max(0.0), hit)
        } else {
            (f64::INFINITY, AxisHit::Wall)
        }
    }

    fn drift(&mut self, dt: f64) {
        self.pos = (self.pos + self.vel * dt).clamp(0.0, self.len);
    }

    fn apply(&mut self, hit: AxisHit) {
        match hit {
            AxisHit::Wall => {
                self.pos = if self.vel > 0.0 { self.len } else { 0.0 };
                self.vel = -self.vel;
            }
            AxisHit::Line => {
                if self.vel > 0.0 {
                    self.cell += 1;
                    self.pos = self.cell as f64 * self.cell_len;
                } else {
                    self.pos = self.cell as f64 * self.cell_len;
                    self.cell -= 1;
                }
            }
        }
    }
}

/// Move `kin` (the state at `t0`) until `t1`, returning every interior
/// boundary crossing in `(t0, t1]` and the state at `t1`.
pub fn advance(
    kin: &UeKinematics,
    grid: &CellGrid,
    ue_id: u32,
    t0: f64,
    t1: f64,
) -> (Vec<CrossingEvent>, UeKinematics) {
    let mut events = Vec::new();
    if !(t1 > t0) || kin.speed == 0.0 {
        return (events, *kin);
    }
    let (col, row) = column_row(kin.x, kin.y, grid);
    let mut ax = Axis::new(
        kin.x,
        kin.speed * kin.direction.cos(),
        col,
        grid.cols,
        grid.cell_width,
        grid.area_width,
    );
    let mut ay = Axis::new(
        kin.y,
        kin.speed * kin.direction.sin(),
        row,
        grid.rows,
        grid.cell_height,
        grid.area_height,
    );
    let mut t = t0;
    loop {
        let (dx, hx) = ax.next_hit();
        let (dy, hy) = ay.next_hit();
        let dt = dx.min(dy);
        if t + dt > t1 || !dt.is_finite() {
            ax.drift(t1 - t);
            ay.drift(t1 - t);
            break;
        }
        t += dt;
        let from = grid.index(ax.cell, ay.cell);
        let x_now = dx - dt <= SIMULTANEOUS_HIT_S;
        let y_now = dy - dt <= SIMULTANEOUS_HIT_S;
        if !x_now {
            ax.drift(dt);
        }
        if !y_now {
            ay.drift(dt);
        }
        if x_now {
            ax.apply(hx);
        }
        if y_now {
            ay.apply(hy);
        }
        let to = grid.index(ax.cell, ay.cell);
        if to != from {
            events.push(CrossingEvent {
                time: t,
                ue_id,
                from_cell: from,
                to_cell: to,
            });
        }
    }
    let direction = ay.vel.atan2(ax.vel).rem_euclid(TAU);
    let end = UeKinematics {
        x: ax.pos,
        y: ay.pos,
        speed: kin.speed,
        direction: if direction >= TAU { 0.0 } else { direction },
    };
    (events, end)
}

/// Cell crossings of one user over `(t0, t1]`; see [`advance`].
pub fn trajectory_crossings(
    kin: &UeKinematics,
    grid: &CellGrid,
    ue_id: u32,
    t0: f64,
    t1: f64,
) -> Vec<CrossingEvent> {
    advance(kin, grid, ue_id, t0, t1).0
}

/// Dump crossings as `time_s,ue_id,from_cell,to_cell`.
pub fn write_crossings_csv<W: Write>(
    crossings: &[Vec<CrossingEvent>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "time_s,ue_id,from_cell,to_cell")?;
    for per_ue in crossings {
        for c in per_ue {
            writeln!(out, "{:.9},{},{},{}", c.time, c.ue_id, c.from_cell, c.to_cell)?;
        }
    }
    Ok(())
}

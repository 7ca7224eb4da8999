//! Manhattan-grid motion of transmitter/receiver pairs.
//!
//! Roads run along `num_intersections_per_axis` evenly spaced coordinates on
//! both axes, boundary roads included. Every road carries two directed lanes
//! offset by half a lane width to the right of travel. A transmitter (vTx)
//! drives at constant speed and picks an exit at each intersection; its
//! receiver (vRx) replays the transmitter's trail exactly `pair_distance`
//! of arc length behind, so a pair always spans a rectilinear path of fixed
//! length.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error};
use crate::scenario::ScenarioConfig;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    East,
    North,
    West,
    South,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::East, Heading::North, Heading::West, Heading::South];

    pub fn unit(self) -> Point {
        match self {
            Heading::East => (1.0, 0.0),
            Heading::North => (0.0, 1.0),
            Heading::West => (-1.0, 0.0),
            Heading::South => (0.0, -1.0),
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Heading::East | Heading::West)
    }

    /// +1 when travel increases the along-road coordinate.
    fn sign(self) -> f64 {
        match self {
            Heading::East | Heading::North => 1.0,
            Heading::West | Heading::South => -1.0,
        }
    }

    fn index_step(self) -> isize {
        self.sign() as isize
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    pub fn right(self) -> Heading {
        self.left().left().left()
    }

    pub fn turned(self, turn: Turn) -> Heading {
        match turn {
            Turn::Straight => self,
            Turn::Left => self.left(),
            Turn::Right => self.right(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Turn {
    Straight,
    Left,
    Right,
}

impl Turn {
    pub const ALL: [Turn; 3] = [Turn::Straight, Turn::Left, Turn::Right];
}

/// An exit decision drawn for an upcoming intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurnDecision {
    pub turn: Turn,
    /// True when all three exits were lawful, so the draw used `turn_probs` unrenormalized.
    pub unrestricted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    side: f64,
    lane_width: f64,
    /// Road centre coordinates, shared by both axes.
    roads: Vec<f64>,
}

impl GridMap {
    pub fn new(side: f64, intersections_per_axis: usize, lane_width: f64) -> Result<Self, ConfigError> {
        if intersections_per_axis < 2 {
            return Err(ConfigError::invalid("num_intersections_per_axis", "must be at least 2"));
        }
        let spacing = side / (intersections_per_axis - 1) as f64;
        if lane_width >= spacing {
            return Err(ConfigError::invalid("lane_width", "must be narrower than the road spacing"));
        }
        let roads = (0..intersections_per_axis).map(|i| i as f64 * spacing).collect();
        Ok(GridMap {
            side,
            lane_width,
            roads,
        })
    }

    pub fn from_config(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        Self::new(config.region_side, config.num_intersections_per_axis, config.lane_width)
    }

    pub fn spacing(&self) -> f64 {
        self.roads[1] - self.roads[0]
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn road_coordinates(&self) -> &[f64] {
        &self.roads
    }

    pub fn intersections(&self) -> Vec<Point> {
        self.roads
            .iter()
            .flat_map(|&y| self.roads.iter().map(move |&x| (x, y)))
            .collect()
    }

    /// Fixed cross-road coordinate of the lane on `road` carrying `heading`
    /// (y for horizontal lanes, x for vertical ones).
    pub fn lane_coordinate(&self, road: usize, heading: Heading) -> f64 {
        let (ux, uy) = heading.unit();
        // right-hand normal of travel
        let (nx, ny) = (uy, -ux);
        let offset = if heading.is_horizontal() { ny } else { nx };
        self.roads[road] + offset * self.lane_width / 2.0
    }

    /// Length of the longest straight lane stretch a parked pair can occupy
    /// without touching an intersection box.
    pub fn longest_clear_stretch(&self) -> f64 {
        self.spacing() - self.lane_width
    }

    /// Distance from `p` to the nearest lane centreline.
    pub fn distance_to_lanes(&self, p: Point) -> f64 {
        let lo = -self.lane_width / 2.0;
        let hi = self.side + self.lane_width / 2.0;
        let clamp_gap = |v: f64| {
            if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            }
        };
        let mut best = f64::INFINITY;
        for road in 0..self.roads.len() {
            for heading in Heading::ALL {
                let c = self.lane_coordinate(road, heading);
                let (across, along) = if heading.is_horizontal() { (p.1, p.0) } else { (p.0, p.1) };
                best = best.min((across - c).abs().hypot(clamp_gap(along)));
            }
        }
        best
    }

    fn road_exists(&self, index: isize) -> bool {
        index >= 0 && (index as usize) < self.roads.len()
    }

    /// Exits that keep the vehicle on the grid at the intersection of `road`
    /// (the one being driven) with `cross`, arriving with `heading`.
    pub fn lawful_exits(&self, road: usize, cross: usize, heading: Heading) -> Vec<Turn> {
        Turn::ALL
            .into_iter()
            .filter(|&turn| {
                let out = heading.turned(turn);
                if turn == Turn::Straight {
                    self.road_exists(cross as isize + out.index_step())
                } else {
                    self.road_exists(road as isize + out.index_step())
                }
            })
            .collect()
    }
}

/// A corner on the vTx trail, with the centre of the intersection it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailCorner {
    pub point: Point,
    pub intersection: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VuePairKinematics {
    pub vtx: Point,
    pub vrx: Point,
    pub heading: Heading,
    /// Road currently driven by the vTx.
    road: usize,
    /// Next road the vTx will cross.
    next_cross: usize,
    /// Exit already chosen for `next_cross`.
    exit: Heading,
    /// Corners between the vRx (oldest) and the vTx.
    pub trail: VecDeque<TrailCorner>,
    pair_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkClass {
    Los,
    Wlos,
    Nlos,
}

impl LinkClass {
    pub fn label(self) -> &'static str {
        match self {
            LinkClass::Los => "LOS",
            LinkClass::Wlos => "WLOS",
            LinkClass::Nlos => "NLOS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub class: LinkClass,
    pub dx: f64,
    pub dy: f64,
}

fn draw_exit<R: Rng + ?Sized>(
    grid: &GridMap,
    road: usize,
    cross: usize,
    heading: Heading,
    turn_probs: &[f64; 3],
    rng: &mut R,
) -> TurnDecision {
    let lawful = grid.lawful_exits(road, cross, heading);
    debug_assert!(!lawful.is_empty(), "grid with at least two roads per axis always has an exit");
    let weight = |t: Turn| turn_probs[Turn::ALL.iter().position(|x| *x == t).unwrap()];
    let total: f64 = lawful.iter().map(|&t| weight(t)).sum();
    let turn = if total > 0.0 {
        let mut u = rng.random::<f64>() * total;
        let mut chosen = *lawful.last().unwrap();
        for &t in &lawful {
            let w = weight(t);
            if w > 0.0 && u < w {
                chosen = t;
                break;
            }
            u -= w;
        }
        chosen
    } else {
        // no probability mass on any lawful exit: pick uniformly among them
        lawful[rng.random_range(0..lawful.len())]
    };
    TurnDecision {
        turn,
        unrestricted: lawful.len() == 3,
    }
}

fn manhattan(a: Point, b: Point) -> f64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

impl VuePairKinematics {
    /// Place a pair uniformly on a random lane stretch with its vRx exactly
    /// `pair_distance` behind the vTx.
    pub fn place<R: Rng + ?Sized>(
        grid: &GridMap,
        pair_distance: f64,
        turn_probs: &[f64; 3],
        rng: &mut R,
    ) -> Result<Self, Error> {
        if pair_distance > grid.longest_clear_stretch() {
            return Err(ConfigError::invalid(
                "pair_distance",
                "exceeds the longest straight lane segment",
            )
            .into());
        }
        let heading = Heading::ALL[rng.random_range(0..4)];
        let road = rng.random_range(0..grid.roads.len());
        let segment = rng.random_range(0..grid.roads.len() - 1);
        let half = grid.lane_width / 2.0;
        let (start, end) = (grid.roads[segment], grid.roads[segment + 1]);
        let span = end - start - 2.0 * half - pair_distance;
        let offset = rng.random::<f64>() * span;
        let sign = heading.sign();
        let (along, next_cross) = if sign > 0.0 {
            (start + half + pair_distance + offset, segment + 1)
        } else {
            (end - half - pair_distance - offset, segment)
        };
        let fixed = grid.lane_coordinate(road, heading);
        let at = |s: f64| if heading.is_horizontal() { (s, fixed) } else { (fixed, s) };
        let exit = heading.turned(draw_exit(grid, road, next_cross, heading, turn_probs, rng).turn);
        Ok(VuePairKinematics {
            vtx: at(along),
            vrx: at(along - sign * pair_distance),
            heading,
            road,
            next_cross,
            exit,
            trail: VecDeque::new(),
            pair_distance,
        })
    }

    pub fn pair_distance(&self) -> f64 {
        self.pair_distance
    }

    fn along(&self) -> f64 {
        if self.heading.is_horizontal() {
            self.vtx.0
        } else {
            self.vtx.1
        }
    }

    fn set_along(&mut self, s: f64) {
        if self.heading.is_horizontal() {
            self.vtx.0 = s;
        } else {
            self.vtx.1 = s;
        }
    }

    /// Move the vTx `distance` meters along its route and drag the vRx along
    /// the trail. Returns the last exit decision drawn during the move.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        grid: &GridMap,
        distance: f64,
        turn_probs: &[f64; 3],
        rng: &mut R,
    ) -> Option<TurnDecision> {
        let mut remaining = distance;
        let mut decision = None;
        while remaining > 0.0 {
            let along = self.along();
            let sign = self.heading.sign();
            let turning = self.exit != self.heading;
            let target = if turning {
                grid.lane_coordinate(self.next_cross, self.exit)
            } else {
                grid.roads[self.next_cross]
            };
            let gap = (target - along) * sign;
            if remaining <= gap {
                self.set_along(along + sign * remaining);
                break;
            }
            remaining -= gap;
            self.set_along(target);
            let crossed = self.next_cross;
            let arriving = self.heading;
            if turning {
                let fixed_road = grid.roads[self.road];
                let intersection = if arriving.is_horizontal() {
                    (grid.roads[crossed], fixed_road)
                } else {
                    (fixed_road, grid.roads[crossed])
                };
                self.trail.push_back(TrailCorner {
                    point: self.vtx,
                    intersection,
                });
                let from_road = self.road;
                self.road = crossed;
                self.heading = self.exit;
                self.next_cross = (from_road as isize + self.heading.index_step()) as usize;
            } else {
                self.next_cross = (crossed as isize + self.heading.index_step()) as usize;
            }
            let d = draw_exit(grid, self.road, self.next_cross, self.heading, turn_probs, rng);
            self.exit = self.heading.turned(d.turn);
            decision = Some(d);
        }
        self.follow();
        decision
    }

    /// Re-place the vRx exactly `pair_distance` of trail behind the vTx and
    /// drop corners it has passed.
    fn follow(&mut self) {
        let mut rem = self.pair_distance;
        let mut ahead = self.vtx;
        let mut keep = self.trail.len();
        loop {
            let behind = if keep == 0 {
                self.vrx
            } else {
                self.trail[keep - 1].point
            };
            let len = manhattan(ahead, behind);
            if rem <= len || keep == 0 {
                let t = if len > 0.0 { rem / len } else { 0.0 };
                self.vrx = (ahead.0 + (behind.0 - ahead.0) * t, ahead.1 + (behind.1 - ahead.1) * t);
                self.trail.drain(..keep);
                return;
            }
            rem -= len;
            ahead = behind;
            keep -= 1;
        }
    }

    /// Arc length of the trail from the vRx through every corner to the vTx.
    pub fn trail_length(&self) -> f64 {
        let mut pts = vec![self.vrx];
        pts.extend(self.trail.iter().map(|c| c.point));
        pts.push(self.vtx);
        pts.windows(2).map(|w| manhattan(w[0], w[1])).sum()
    }

    pub fn classify(&self, intersection_radius: f64) -> LinkGeometry {
        let dx = (self.vtx.0 - self.vrx.0).abs();
        let dy = (self.vtx.1 - self.vrx.1).abs();
        let class = match self.trail.len() {
            0 => LinkClass::Los,
            1 => {
                let c = self.trail[0].intersection;
                let dist = |p: Point| (p.0 - c.0).hypot(p.1 - c.1);
                if dist(self.vtx).min(dist(self.vrx)) <= intersection_radius {
                    LinkClass::Wlos
                } else {
                    LinkClass::Nlos
                }
            }
            _ => LinkClass::Nlos,
        };
        LinkGeometry { class, dx, dy }
    }
}

/// Place `config.num_pairs` pairs, each drawing from its own generator.
pub fn initialize_fleet<R: Rng>(
    config: &ScenarioConfig,
    grid: &GridMap,
    rngs: &mut [R],
) -> Result<Vec<VuePairKinematics>, Error> {
    assert_eq!(rngs.len(), config.num_pairs);
    rngs.iter_mut()
        .map(|rng| VuePairKinematics::place(grid, config.pair_distance, &config.turn_probs, rng))
        .collect()
}

//! Random-waypoint motion inside a rectangle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RngStream, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("region dimensions must be positive, got {width} x {height} m")]
    BadRegion { width: f64, height: f64 },
    #[error("speed must be positive, got {0} m/s")]
    BadSpeed(f64),
    #[error("time {t} s is outside the leg interval [{depart}, {arrive}] s")]
    OutsideLeg { t: f64, depart: f64, arrive: f64 },
    #[error("time {t} s precedes the trajectory's current leg starting at {depart} s")]
    Rewind { t: f64, depart: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Bearing from `self` to `other` in degrees, counter-clockwise from +x.
    pub fn bearing_deg(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).to_degrees()
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    width: f64,
    height: f64,
}

impl Region {
    /// The 1500 m x 1500 m simulation area.
    pub const TABLE1: Region = Region {
        width: 1500.0,
        height: 1500.0,
    };
    /// The 300 m x 1500 m strip named in the scenario prose.
    pub const PAPER_TEXT: Region = Region {
        width: 300.0,
        height: 1500.0,
    };

    pub fn new(width: f64, height: f64) -> Result<Self, MobilityError> {
        if width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite() {
            Ok(Region { width, height })
        } else {
            Err(MobilityError::BadRegion { width, height })
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Point {
        let x = rng.uniform(0.0, self.width).expect("positive width");
        let y = rng.uniform(0.0, self.height).expect("positive height");
        Point::new(x, y)
    }
}

impl Default for Region {
    fn default() -> Self {
        Region::TABLE1
    }
}

/// Straight-line motion from `origin` to `target`, followed by an optional pause.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointLeg {
    pub origin: Point,
    pub target: Point,
    pub speed: f64,
    pub depart_at: SimTime,
    pub pause: f64,
}

impl WaypointLeg {
    pub fn length(&self) -> f64 {
        distance(self.origin, self.target)
    }

    pub fn travel_time(&self) -> f64 {
        self.length() / self.speed
    }

    pub fn arrive_at(&self) -> SimTime {
        self.depart_at.after(self.travel_time())
    }

    /// End of the leg including the pause at the target.
    pub fn end_at(&self) -> SimTime {
        self.depart_at.after(self.travel_time() + self.pause)
    }

    pub fn position_at(&self, t: SimTime) -> Result<Point, MobilityError> {
        let end = self.end_at();
        if t < self.depart_at || t > end {
            return Err(MobilityError::OutsideLeg {
                t: t.as_secs(),
                depart: self.depart_at.as_secs(),
                arrive: end.as_secs(),
            });
        }
        let travelled = (t.as_secs() - self.depart_at.as_secs()) * self.speed;
        let len = self.length();
        if travelled >= len {
            return Ok(self.target);
        }
        let frac = travelled / len;
        Ok(Point::new(
            self.origin.x + (self.target.x - self.origin.x) * frac,
            self.origin.y + (self.target.y - self.origin.y) * frac,
        ))
    }
}

/// Draws the next leg from `current`. Degenerate (zero-length) targets are redrawn.
pub fn next_leg(
    current: Point,
    rng: &mut RngStream,
    region: &Region,
    speed: f64,
    pause: f64,
    now: SimTime,
) -> Result<WaypointLeg, MobilityError> {
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(MobilityError::BadSpeed(speed));
    }
    let target = loop {
        let candidate = region.sample(rng);
        if candidate != current {
            break candidate;
        }
    };
    Ok(WaypointLeg {
        origin: current,
        target,
        speed,
        depart_at: now,
        pause: pause.max(0.0),
    })
}

/// Lazily-advanced random-waypoint trajectory of one node.
///
/// Legs are drawn from the node's own stream only, so the path is a function of
/// (seed, node) no matter when or how often positions are queried. Queries must be
/// non-decreasing in time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    region: Region,
    speed: f64,
    pause: f64,
    rng: RngStream,
    leg: WaypointLeg,
    legs_started: u64,
}

impl Trajectory {
    pub fn new(region: Region, speed: f64, pause: f64, mut rng: RngStream) -> Result<Self, MobilityError> {
        let start = region.sample(&mut rng);
        let leg = next_leg(start, &mut rng, &region, speed, pause, SimTime::ZERO)?;
        Ok(Trajectory {
            region,
            speed,
            pause,
            rng,
            leg,
            legs_started: 1,
        })
    }

    pub fn current_leg(&self) -> &WaypointLeg {
        &self.leg
    }

    /// Number of legs drawn so far, also used as a leg index.
    pub fn legs_started(&self) -> u64 {
        self.legs_started
    }

    fn advance_to(&mut self, t: SimTime) -> Result<(), MobilityError> {
        if t < self.leg.depart_at {
            return Err(MobilityError::Rewind {
                t: t.as_secs(),
                depart: self.leg.depart_at.as_secs(),
            });
        }
        while t > self.leg.end_at() {
            let end = self.leg.end_at();
            self.leg = next_leg(
                self.leg.target,
                &mut self.rng,
                &self.region,
                self.speed,
                self.pause,
                end,
            )?;
            self.legs_started += 1;
        }
        Ok(())
    }

    pub fn position_at(&mut self, t: SimTime) -> Result<Point, MobilityError> {
        self.advance_to(t)?;
        let p = self.leg.position_at(t)?;
        debug_assert!(self.region.contains(p));
        Ok(p)
    }

    /// Index of the leg active at `t`.
    pub fn leg_index_at(&mut self, t: SimTime) -> Result<u64, MobilityError> {
        self.advance_to(t)?;
        Ok(self.legs_started)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn distance_basics() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
        let p = Point::new(12.5, -3.0);
        assert_eq!(distance(p, p), 0.0);
    }

    #[test]
    fn targets_stay_in_region() {
        let mut rng = RngStream::new(3, "mobility/0");
        let region = Region::TABLE1;
        for _ in 0..10_000 {
            let leg = next_leg(Point::new(10.0, 10.0), &mut rng, &region, 20.0, 0.0, SimTime::ZERO).unwrap();
            assert!(region.contains(leg.target));
        }
    }

    #[test]
    fn target_mean_is_region_center() {
        let mut rng = RngStream::new(11, "mobility/0");
        let region = Region::TABLE1;
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let leg = next_leg(Point::new(0.0, 0.0), &mut rng, &region, 20.0, 0.0, SimTime::ZERO).unwrap();
            sx += leg.target.x;
            sy += leg.target.y;
        }
        assert!((sx / n as f64 - 750.0).abs() < 15.0);
        assert!((sy / n as f64 - 750.0).abs() < 15.0);
    }

    #[test]
    fn leg_duration_and_interpolation() {
        let leg = WaypointLeg {
            origin: Point::new(0.0, 0.0),
            target: Point::new(300.0, 400.0),
            speed: 20.0,
            depart_at: SimTime::secs(10.0),
            pause: 0.0,
        };
        assert_eq!(leg.travel_time(), 25.0);
        let p = leg.position_at(SimTime::secs(15.0)).unwrap();
        assert_abs_diff_eq!(p.x, 60.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 80.0, epsilon = 1e-9);
        assert_eq!(leg.position_at(SimTime::secs(10.0)).unwrap(), leg.origin);
        let end = leg.position_at(leg.arrive_at()).unwrap();
        assert!(distance(end, leg.target) < 1e-9);
        assert!(leg.position_at(SimTime::secs(9.0)).is_err());
        assert!(leg.position_at(SimTime::secs(35.1)).is_err());

        let short = WaypointLeg {
            target: Point::new(60.0, 80.0),
            ..leg
        };
        assert_eq!(short.travel_time(), 5.0);
    }

    #[test]
    fn zero_speed_rejected() {
        let mut rng = RngStream::new(1, "m");
        assert!(next_leg(Point::default(), &mut rng, &Region::TABLE1, 0.0, 0.0, SimTime::ZERO).is_err());
        assert!(Region::new(0.0, 10.0).is_err());
    }

    #[test]
    fn trajectory_independent_of_query_pattern() {
        let make = || Trajectory::new(Region::TABLE1, 20.0, 0.0, RngStream::new(5, "mobility/7")).unwrap();
        let mut dense = make();
        let mut sparse = make();
        let mut dense_at_50 = Point::default();
        for i in 0..=5000 {
            let t = SimTime::secs(i as f64 * 0.01);
            let p = dense.position_at(t).unwrap();
            if i == 5000 {
                dense_at_50 = p;
            }
        }
        let p = sparse.position_at(SimTime::secs(50.0)).unwrap();
        assert_eq!(p, dense_at_50);
    }

    #[test]
    fn trajectory_rejects_rewind_past_leg() {
        let mut tr = Trajectory::new(Region::TABLE1, 20.0, 0.0, RngStream::new(5, "mobility/1")).unwrap();
        tr.position_at(SimTime::secs(500.0)).unwrap();
        assert!(tr.position_at(SimTime::secs(0.0)).is_err());
    }

    #[test]
    fn speed_is_constant_along_trajectory() {
        let mut tr = Trajectory::new(Region::TABLE1, 20.0, 0.0, RngStream::new(8, "mobility/2")).unwrap();
        let dt = 1e-3;
        let mut t = 0.0;
        while t < 200.0 {
            let leg = *tr.current_leg();
            let a = tr.position_at(SimTime::secs(t)).unwrap();
            // Only compare samples inside one leg; corners change direction.
            if SimTime::secs(t + dt) <= leg.arrive_at() && tr.current_leg().depart_at == leg.depart_at {
                let b = leg.position_at(SimTime::secs(t + dt)).unwrap();
                let v = distance(a, b) / dt;
                assert!((v - 20.0).abs() < 1e-6, "speed {v} at t={t}");
            }
            t += 0.37;
        }
    }

    #[test]
    fn paused_node_stays_put() {
        let mut rng = RngStream::new(2, "m");
        let leg = next_leg(
            Point::new(1.0, 1.0),
            &mut rng,
            &Region::TABLE1,
            20.0,
            3.0,
            SimTime::ZERO,
        )
        .unwrap();
        let arrive = leg.arrive_at();
        assert_eq!(leg.position_at(arrive.after(2.0)).unwrap(), leg.target);
    }

    proptest! {
        #[test]
        fn distance_symmetric(ax in -1e4f64..1e4, ay in -1e4f64..1e4, bx in -1e4f64..1e4, by in -1e4f64..1e4) {
            let a = Point::new(ax, ay);
            let b = Point::new(bx, by);
            prop_assert_eq!(distance(a, b), distance(b, a));
        }

        #[test]
        fn node_never_leaves_region(seed in 0u64..500, w in 50.0f64..2000.0, h in 50.0f64..2000.0) {
            let region = Region::new(w, h).unwrap();
            let mut tr = Trajectory::new(region, 20.0, 0.0, RngStream::new(seed, "mobility/0")).unwrap();
            for i in 0..400 {
                let p = tr.position_at(SimTime::secs(i as f64 * 0.5)).unwrap();
                prop_assert!(region.contains(p));
            }
        }
    }
}

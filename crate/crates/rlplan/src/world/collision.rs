//! Rectangle overlap tests between vehicles. Footprints are oriented
//! rectangles in Cartesian coordinates; overlap uses axis separation over
//! the four edge normals, with touching counted as collision.

use crate::frenet::{FrenetError, ReferenceLine};
use crate::uncertainty::OrientedRect;

use super::{Frame, VehicleState};

/// Cartesian footprint of a vehicle described in road coordinates.
pub fn vehicle_rect(line: &ReferenceLine, v: &VehicleState) -> Result<OrientedRect, FrenetError> {
    let (cx, cy, road_heading) = line.point_at(v.frenet.s, v.frenet.d)?;
    Ok(OrientedRect {
        cx,
        cy,
        heading: crate::frenet::wrap_angle(road_heading + v.heading_dev),
        length: v.length,
        width: v.width,
    })
}

fn interval_on_axis(corners: &[[f64; 2]; 4], ax: f64, ay: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &[x, y] in corners {
        let t = x * ax + y * ay;
        lo = lo.min(t);
        hi = hi.max(t);
    }
    (lo, hi)
}

fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for rect in [a, b] {
        let (sin, cos) = rect.heading.sin_cos();
        for (ax, ay) in [(cos, sin), (-sin, cos)] {
            let (alo, ahi) = interval_on_axis(&ca, ax, ay);
            let (blo, bhi) = interval_on_axis(&cb, ax, ay);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

/// Whether two vehicles' footprints overlap (shared boundary counts).
pub fn check_collision(
    line: &ReferenceLine,
    a: &VehicleState,
    b: &VehicleState,
) -> Result<bool, FrenetError> {
    Ok(rects_overlap(&vehicle_rect(line, a)?, &vehicle_rect(line, b)?))
}

/// Whether the controlled vehicle overlaps any participant in `frame`.
pub fn check_collision_frame(line: &ReferenceLine, frame: &Frame) -> Result<bool, FrenetError> {
    for p in &frame.participants {
        if check_collision(line, &frame.av, p)? {
            return Ok(true);
        }
    }
    Ok(false)
}

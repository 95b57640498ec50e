#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeoError;

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// A WGS-84 geodetic position. Latitude and longitude in degrees, altitude in
/// meters above the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl GeodeticPosition {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self, GeoError> {
        let p = Self { lat_deg, lon_deg, alt_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.lat_deg.is_finite() && self.lon_deg.is_finite() && self.alt_m.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(GeoError::LatitudeOutOfRange(self.lat_deg));
        }
        if !(-180.0..180.0).contains(&self.lon_deg) {
            return Err(GeoError::LongitudeOutOfRange(self.lon_deg));
        }
        Ok(())
    }

    pub fn to_ecef(&self) -> Vector3<f64> {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        let (sl, cl) = lat.sin_cos();
        let n = WGS84_A / (1.0 - WGS84_E2 * sl * sl).sqrt();
        Vector3::new(
            (n + self.alt_m) * cl * lon.cos(),
            (n + self.alt_m) * cl * lon.sin(),
            (n * (1.0 - WGS84_E2) + self.alt_m) * sl,
        )
    }

    pub fn from_ecef(p: &Vector3<f64>) -> Self {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        let lon = p.y.atan2(p.x);
        let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
        for _ in 0..10 {
            let (sl, cl) = lat.sin_cos();
            let n = WGS84_A / (1.0 - WGS84_E2 * sl * sl).sqrt();
            let alt = rho * cl + p.z * sl - WGS84_A * WGS84_A / n;
            let next = p.z.atan2(rho * (1.0 - WGS84_E2 * n / (n + alt)));
            let done = (next - lat).abs() < 1e-15;
            lat = next;
            if done {
                break;
            }
        }
        let (sl, cl) = lat.sin_cos();
        let n = WGS84_A / (1.0 - WGS84_E2 * sl * sl).sqrt();
        // Valid at every latitude, including the poles.
        let alt = rho * cl + p.z * sl - WGS84_A * WGS84_A / n;
        let mut lon_deg = lon.to_degrees();
        if lon_deg >= 180.0 {
            lon_deg -= 360.0;
        }
        Self { lat_deg: lat.to_degrees(), lon_deg, alt_m: alt }
    }
}

/// East/north/up coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuPoint {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuPoint {
    pub const fn new(e: f64, n: f64, u: f64) -> Self {
        Self { e, n, u }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.e, self.n, self.u)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self { e: v.x, n: v.y, u: v.z }
    }
}

/// A local tangent-plane frame anchored at a geodetic origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnuFrame {
    origin: GeodeticPosition,
    origin_ecef: Vector3<f64>,
    // Rows are the east, north and up unit vectors in ECEF.
    ecef_to_enu: Matrix3<f64>,
}

impl EnuFrame {
    pub fn new(origin: GeodeticPosition) -> Result<Self, GeoError> {
        origin.validate()?;
        let (lat, lon) = (origin.lat_deg.to_radians(), origin.lon_deg.to_radians());
        let (sl, cl) = lat.sin_cos();
        let (so, co) = lon.sin_cos();
        let ecef_to_enu = Matrix3::new(-so, co, 0.0, -sl * co, -sl * so, cl, cl * co, cl * so, sl);
        Ok(Self { origin, origin_ecef: origin.to_ecef(), ecef_to_enu })
    }

    /// Frame centered at the median latitude, longitude and altitude of the
    /// given positions.
    pub fn at_median<'a>(positions: impl IntoIterator<Item = &'a GeodeticPosition>) -> Result<Self, GeoError> {
        let mut lat = alloc::vec::Vec::new();
        let mut lon = alloc::vec::Vec::new();
        let mut alt = alloc::vec::Vec::new();
        for p in positions {
            lat.push(p.lat_deg);
            lon.push(p.lon_deg);
            alt.push(p.alt_m);
        }
        if lat.is_empty() {
            return Err(GeoError::EmptyTrajectory);
        }
        Self::new(GeodeticPosition { lat_deg: median(&mut lat), lon_deg: median(&mut lon), alt_m: median(&mut alt) })
    }

    pub fn origin(&self) -> GeodeticPosition {
        self.origin
    }

    pub fn to_enu(&self, p: &GeodeticPosition) -> Result<EnuPoint, GeoError> {
        p.validate()?;
        Ok(EnuPoint::from_vector(&(self.ecef_to_enu * (p.to_ecef() - self.origin_ecef))))
    }

    pub fn to_geodetic(&self, p: &EnuPoint) -> GeodeticPosition {
        GeodeticPosition::from_ecef(&(self.origin_ecef + self.ecef_to_enu.transpose() * p.to_vector()))
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn geodetic_to_enu(p: &GeodeticPosition, frame: &EnuFrame) -> Result<EnuPoint, GeoError> {
    frame.to_enu(p)
}

pub fn enu_to_geodetic(p: &EnuPoint, frame: &EnuFrame) -> GeodeticPosition {
    frame.to_geodetic(p)
}

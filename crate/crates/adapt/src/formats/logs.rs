use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use adapt_core::calib::SfmPose;
use adapt_core::geo::{GeodeticPosition, PoseStatus, TimestampedPose, UnitQuaternion};
use adapt_core::timebase::PpsEvent;

use super::FormatError;

const INS_COLUMNS: [&str; 9] = ["t_gps_s", "lat_deg", "lon_deg", "alt_m", "qw", "qx", "qy", "qz", "status_hex"];

/// Maps the required column names onto positions in `headers`.
fn column_indices<const N: usize>(headers: &csv::StringRecord, names: [&'static str; N]) -> Result<[usize; N], FormatError> {
    let mut out = [0; N];
    for (o, name) in out.iter_mut().zip(names) {
        *o = headers.iter().position(|h| h.trim() == name).ok_or(FormatError::MissingColumn(name))?;
    }
    Ok(out)
}

fn csv_reader(r: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<&'a str, FormatError> {
    rec.get(idx).ok_or_else(|| FormatError::parse(line, format!("no value for `{name}`")))
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, FormatError> {
    let s = field(rec, idx, name, line)?;
    s.parse().map_err(|_| FormatError::parse(line, format!("`{name}` is not a number: {s:?}")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// INS trajectory CSV. Attitude rotates body vectors into ENU.
pub fn read_ins_csv(r: impl Read) -> Result<Vec<TimestampedPose>, FormatError> {
    let mut rdr = csv_reader(r);
    let idx = column_indices(rdr.headers()?, INS_COLUMNS)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let v = |k: usize| number(&rec, idx[k], INS_COLUMNS[k], line);
        let position = GeodeticPosition::new(v(1)?, v(2)?, v(3)?).map_err(|e| FormatError::parse(line, e.to_string()))?;
        let attitude = UnitQuaternion::from_wxyz(v(4)?, v(5)?, v(6)?, v(7)?).map_err(|e| FormatError::parse(line, e.to_string()))?;
        let hex = field(&rec, idx[8], "status_hex", line)?;
        let digits = hex.strip_prefix("0x").or_else(|| hex.strip_prefix("0X")).unwrap_or(hex);
        let status = u8::from_str_radix(digits, 16).map_err(|_| FormatError::parse(line, format!("bad status_hex {hex:?}")))?;
        out.push(TimestampedPose { t: v(0)?, position, attitude, status: PoseStatus(status) });
    }
    Ok(out)
}

pub fn write_ins_csv(w: &mut dyn Write, poses: &[TimestampedPose]) -> Result<(), FormatError> {
    writeln!(w, "{}", INS_COLUMNS.join(","))?;
    for p in poses {
        let [qw, qx, qy, qz] = p.attitude.wxyz();
        let g = p.position;
        writeln!(w, "{},{},{},{},{qw},{qx},{qy},{qz},0x{:02x}", p.t, g.lat_deg, g.lon_deg, g.alt_m, p.status.0)?;
    }
    Ok(())
}

/// `image_name, t_gps_s` sidecar joining SfM images to capture times.
pub fn read_image_times(r: impl Read) -> Result<BTreeMap<String, f64>, FormatError> {
    let mut rdr = csv_reader(r);
    let [name, t] = column_indices(rdr.headers()?, ["image_name", "t_gps_s"])?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let image = field(&rec, name, "image_name", line)?.to_string();
        let time = number(&rec, t, "t_gps_s", line)?;
        if out.insert(image.clone(), time).is_some() {
            return Err(FormatError::parse(line, format!("image {image} listed twice")));
        }
    }
    Ok(out)
}

pub fn write_image_times(w: &mut dyn Write, poses: &[SfmPose]) -> Result<(), FormatError> {
    writeln!(w, "image_name,t_gps_s")?;
    for p in poses {
        writeln!(w, "{},{}", p.image_name, p.t_image)?;
    }
    Ok(())
}

/// SfM pose export: `image_name qw qx qy qz tx ty tz` per line with a
/// world→camera rotation and translation. Blank lines and `#` comments are
/// skipped. Capture times come from `times`.
pub fn read_sfm_poses(r: impl Read, times: &BTreeMap<String, f64>) -> Result<Vec<SfmPose>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 8 {
            return Err(FormatError::parse(line_no, format!("expected 8 fields, found {}", parts.len())));
        }
        let mut v = [0.0; 7];
        for (o, s) in v.iter_mut().zip(&parts[1..]) {
            *o = s.parse().map_err(|_| FormatError::parse(line_no, format!("not a number: {s:?}")))?;
        }
        let name = parts[0];
        let t = *times.get(name).ok_or_else(|| FormatError::parse(line_no, format!("no capture time for image {name}")))?;
        let q = UnitQuaternion::from_wxyz(v[0], v[1], v[2], v[3]).map_err(|e| FormatError::parse(line_no, e.to_string()))?;
        out.push(SfmPose::from_world_to_camera(name.to_string(), t, q, [v[4], v[5], v[6]]));
    }
    Ok(out)
}

pub fn write_sfm_poses(w: &mut dyn Write, poses: &[SfmPose]) -> Result<(), FormatError> {
    writeln!(w, "# image_name qw qx qy qz tx ty tz")?;
    for p in poses {
        let [qw, qx, qy, qz] = p.rotation.wxyz();
        let [tx, ty, tz] = p.translation();
        writeln!(w, "{} {qw} {qx} {qy} {qz} {tx} {ty} {tz}", p.image_name)?;
    }
    Ok(())
}

/// PPS event log: `true_gps_s, observed_local_s`.
pub fn read_pps_csv(r: impl Read) -> Result<Vec<PpsEvent>, FormatError> {
    let mut rdr = csv_reader(r);
    let [t, obs] = column_indices(rdr.headers()?, ["true_gps_s", "observed_local_s"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let s = field(&rec, t, "true_gps_s", line)?;
        let true_gps_s = s.parse().map_err(|_| FormatError::parse(line, format!("`true_gps_s` is not an integer: {s:?}")))?;
        out.push(PpsEvent { true_gps_s, observed_local_s: number(&rec, obs, "observed_local_s", line)? });
    }
    Ok(out)
}

pub fn write_pps_csv(w: &mut dyn Write, events: &[PpsEvent]) -> Result<(), FormatError> {
    writeln!(w, "true_gps_s,observed_local_s")?;
    for e in events {
        writeln!(w, "{},{}", e.true_gps_s, e.observed_local_s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(t: f64) -> TimestampedPose {
        TimestampedPose {
            t,
            position: GeodeticPosition::new(64.8458, -147.7187, 160.25).unwrap(),
            attitude: UnitQuaternion::from_yaw_pitch_roll(0.3, -0.1, 0.05),
            status: PoseStatus(0x03),
        }
    }

    #[test]
    fn ins_round_trip() {
        let poses = vec![pose(1.4e9), pose(1.4e9 + 0.01)];
        let mut buf = Vec::new();
        write_ins_csv(&mut buf, &poses).unwrap();
        let back = read_ins_csv(&buf[..]).unwrap();
        for (a, b) in poses.iter().zip(&back) {
            assert_eq!((a.t, a.position, a.status), (b.t, b.position, b.status));
            // Renormalization on read may move the last bit.
            assert!(a.attitude.approx_eq(&b.attitude, 1e-15));
        }
    }

    #[test]
    fn missing_ins_column_is_named() {
        let csv = "t_gps_s,lat_deg,lon_deg,alt_m,qw,qx,qy,status_hex\n0,1,2,3,1,0,0,0x3\n";
        let err = read_ins_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::MissingColumn("qz")), "{err}");
        assert!(err.to_string().contains("qz"));
    }

    #[test]
    fn ins_columns_may_be_reordered_and_padded() {
        let csv = "qw, qx, qy, qz, status_hex, t_gps_s, lat_deg, lon_deg, alt_m\n1, 0, 0, 0, 03, 5.5, 10, 20, 30\n";
        let p = read_ins_csv(csv.as_bytes()).unwrap();
        assert_eq!(p[0].t, 5.5);
        assert_eq!(p[0].status, PoseStatus::VALID);
        assert_eq!(p[0].position.alt_m, 30.0);
    }

    #[test]
    fn bad_number_reports_line() {
        let csv = "t_gps_s,lat_deg,lon_deg,alt_m,qw,qx,qy,qz,status_hex\n0,1,2,3,1,0,0,0,3\n1,x,2,3,1,0,0,0,3\n";
        match read_ins_csv(csv.as_bytes()).unwrap_err() {
            FormatError::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("lat_deg"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn sfm_round_trip_through_times_sidecar() {
        let q = UnitQuaternion::from_yaw_pitch_roll(1.0, 0.2, -0.3);
        let poses = vec![
            SfmPose { image_name: "img_000000".into(), t_image: 10.125, position: [1.0, 2.0, 3.0], rotation: q },
            SfmPose { image_name: "img_000001".into(), t_image: 10.625, position: [-4.0, 0.5, 9.0], rotation: q.conjugate() },
        ];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_sfm_poses(&mut a, &poses).unwrap();
        write_image_times(&mut b, &poses).unwrap();
        let times = read_image_times(&b[..]).unwrap();
        let back = read_sfm_poses(&a[..], &times).unwrap();
        for (p, q) in poses.iter().zip(&back) {
            assert_eq!(p.image_name, q.image_name);
            assert_eq!(p.t_image, q.t_image);
            assert!(p.rotation.approx_eq(&q.rotation, 1e-12));
            for k in 0..3 {
                assert!((p.position[k] - q.position[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sfm_image_without_time_is_an_error() {
        let err = read_sfm_poses("a 1 0 0 0 0 0 0\n".as_bytes(), &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("no capture time for image a"));
    }

    #[test]
    fn pps_round_trip() {
        let ev = vec![PpsEvent { true_gps_s: 1_400_000_000, observed_local_s: 1_400_000_000.000_25 }];
        let mut buf = Vec::new();
        write_pps_csv(&mut buf, &ev).unwrap();
        assert_eq!(read_pps_csv(&buf[..]).unwrap(), ev);
    }
}

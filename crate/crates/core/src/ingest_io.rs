//! Block CSV ingestion, lon/lat projection, and the result file set.
//!
//! All text output is UTF-8 with LF line endings. Reals are written in the
//! shortest form that parses back to the same `f64`.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexCell;
use crate::lloyd::{centroid_step, LloydRun};
use crate::model::{BalancedAssignment, Block, CenterSet, Instance, IterationRecord, Point2, PowerWeights};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

pub const BLOCKS_FILE: &str = "blocks.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const CENTERS_FILE: &str = "centers.csv";
pub const CELLS_FILE: &str = "cells.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const PLOT_DIR: &str = "plotdata";

const PLANAR_HEADER: [&str; 4] = ["block_id", "x", "y", "population"];
const LONLAT_HEADER: [&str; 4] = ["block_id", "lon", "lat", "population"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Columns are `lon,lat` in degrees and get projected.
    pub lonlat: bool,
}

/// Equirectangular projection about a reference parallel:
/// `x = R · lon · cos(lat0)`, `y = R · lat`, angles in radians.
pub fn project(lon: f64, lat: f64, reference_lat: f64) -> Result<Point2> {
    for l in [lat, reference_lat] {
        if !(l.abs() < 89.0) {
            return Err(Error::Latitude(l));
        }
    }
    if !lon.is_finite() {
        return Err(Error::InvalidInstance(format!("longitude {lon} is not finite")));
    }
    Ok(Point2::new(
        EARTH_RADIUS_M * lon.to_radians() * reference_lat.to_radians().cos(),
        EARTH_RADIUS_M * lat.to_radians(),
    ))
}

struct RawRow {
    line: u64,
    id: String,
    a: f64,
    b: f64,
    population: u64,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_error(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("invalid {name} `{raw}`")))
}

/// Reads `block_id,x,y,population` (or `block_id,lon,lat,population` with
/// `opts.lonlat`) into an instance with `k` districts.
pub fn read_blocks(path: &Path, opts: &ReadOptions, k: usize) -> Result<Instance> {
    let blocks = read_block_rows(path, opts)?;
    Instance::new(blocks, k)
}

pub fn read_block_rows(path: &Path, opts: &ReadOptions) -> Result<Vec<Block>> {
    let mut reader = csv_reader(path)?;
    let header = if opts.lonlat { LONLAT_HEADER } else { PLANAR_HEADER };
    check_header(path, &mut reader, &header)?;
    let mut rows = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let fallback = i as u64 + 2;
        let record = record.map_err(|e| {
            let line = e.position().map_or(fallback, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record_line(&record, fallback);
        if record.len() != 4 {
            return Err(parse_error(path, line, format!("expected 4 fields, found {}", record.len())));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty block_id"));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(parse_error(path, line, format!("duplicate block_id `{id}` (first on line {first})")));
        }
        let a: f64 = parse_field(path, line, header[1], &record[1])?;
        let b: f64 = parse_field(path, line, header[2], &record[2])?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(parse_error(path, line, "non-finite coordinate"));
        }
        let pop_raw = record[3].trim();
        if pop_raw.starts_with('-') {
            return Err(parse_error(path, line, format!("negative population `{pop_raw}`")));
        }
        let population: u64 = parse_field(path, line, "population", pop_raw)?;
        rows.push(RawRow {
            line,
            id,
            a,
            b,
            population,
        });
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no blocks"));
    }
    let lat0 = if opts.lonlat {
        rows.iter().map(|r| r.b).sum::<f64>() / rows.len() as f64
    } else {
        0.0
    };
    rows.into_iter()
        .map(|r| {
            let location = if opts.lonlat {
                project(r.a, r.b, lat0).map_err(|e| parse_error(path, r.line, e.to_string()))?
            } else {
                Point2::new(r.a, r.b)
            };
            Ok(Block::new(r.id, location, r.population))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSummary {
    pub index: usize,
    pub population: u64,
    /// Exact flow-weighted centroid of the district.
    pub centroid: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub k: usize,
    pub m: u64,
    pub seed: u64,
    pub iterations: usize,
    pub final_cost: f64,
    pub final_scaled_cost: i64,
    pub converged: bool,
    /// Integer cost units per squared planar unit.
    pub cost_scale: f64,
    pub lattice_step: f64,
    pub threshold: f64,
    pub centers: Vec<CenterSummary>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub center: usize,
    pub weight: f64,
    pub ring: Vec<[f64; 2]>,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterRow {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub capacity: u64,
    pub population: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub block_id: String,
    pub center_index: usize,
    pub persons_assigned: u64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e)
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    // Explicit header so empty files still carry one.
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_blocks(path: &Path, inst: &Instance) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        block_id: &'a str,
        x: f64,
        y: f64,
        population: u64,
    }
    write_rows(
        path,
        &PLANAR_HEADER,
        inst.blocks().iter().map(|b| Row {
            block_id: &b.id,
            x: b.location.x,
            y: b.location.y,
            population: b.population,
        }),
    )
}

pub fn write_assignment(path: &Path, inst: &Instance, asg: &BalancedAssignment) -> Result<()> {
    write_rows(
        path,
        &["block_id", "center_index", "persons_assigned"],
        asg.iter().map(|(b, x, f)| AssignmentRow {
            block_id: inst.blocks()[b].id.clone(),
            center_index: x,
            persons_assigned: f,
        }),
    )
}

pub fn write_trace(path: &Path, iterations: &[IterationRecord]) -> Result<()> {
    write_rows(
        path,
        &["iteration", "cost", "scaled_cost", "max_displacement"],
        iterations,
    )
}

pub fn center_rows(centers: &CenterSet, weights: &PowerWeights, asg: &BalancedAssignment) -> Vec<CenterRow> {
    let pops = asg.center_populations(centers.k());
    (0..centers.k())
        .map(|x| CenterRow {
            index: x,
            x: centers.centers()[x].x,
            y: centers.centers()[x].y,
            weight: weights.w[x],
            capacity: centers.capacities()[x],
            population: pops[x],
        })
        .collect()
}

pub fn write_centers(path: &Path, rows: &[CenterRow]) -> Result<()> {
    write_rows(path, &["index", "x", "y", "weight", "capacity", "population"], rows)
}

pub fn cell_records(cells: &[ConvexCell], weights: &PowerWeights) -> Vec<CellRecord> {
    cells
        .iter()
        .map(|c| CellRecord {
            center: c.center,
            weight: weights.w[c.center],
            ring: c.ring().iter().map(|p| [p.x, p.y]).collect(),
            clipped: c.clipped,
        })
        .collect()
}

fn write_plotdata(dir: &Path, cells: &[ConvexCell]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for cell in cells {
        let path = dir.join(format!("cell_{:03}.dat", cell.center));
        let mut text = String::new();
        for p in cell.ring() {
            text.push_str(&format!("{} {}\n", p.x, p.y));
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Writes the full result set for `run` into `out_dir` and returns the
/// summary that went into `summary.json`.
pub fn write_outputs(
    out_dir: &Path,
    name: &str,
    run: &LloydRun,
    cells: &[ConvexCell],
    wall_time_seconds: f64,
) -> Result<RunSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let inst = &run.instance;
    let centroids = centroid_step(inst, &run.assignment, &run.centers)?;
    let pops = run.assignment.center_populations(run.centers.k());
    let summary = RunSummary {
        instance: name.to_string(),
        k: inst.k(),
        m: inst.total_population(),
        seed: run.trace.seed,
        iterations: run.iterations(),
        final_cost: run.cost(),
        final_scaled_cost: run.scaled_cost,
        converged: run.converged(),
        cost_scale: run.lattice.cost_scale(),
        lattice_step: run.lattice.step,
        threshold: run.threshold,
        centers: centroids
            .centers()
            .iter()
            .enumerate()
            .map(|(index, c)| CenterSummary {
                index,
                population: pops[index],
                centroid: [c.x, c.y],
            })
            .collect(),
        wall_time_seconds,
    };

    write_blocks(&out_dir.join(BLOCKS_FILE), inst)?;
    write_assignment(&out_dir.join(ASSIGNMENT_FILE), inst, &run.assignment)?;
    write_centers(
        &out_dir.join(CENTERS_FILE),
        &center_rows(&run.centers, &run.weights, &run.assignment),
    )?;
    write_json(&out_dir.join(CELLS_FILE), &cell_records(cells, &run.weights))?;
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    write_trace(&out_dir.join(TRACE_FILE), &run.trace.iterations)?;
    write_plotdata(&out_dir.join(PLOT_DIR), cells)?;
    Ok(summary)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv_reader(path)?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| {
                let line = e.position().map_or(i as u64 + 2, |p| p.line());
                parse_error(path, line, e.to_string())
            })
        })
        .collect()
}

pub fn read_assignment_rows(path: &Path) -> Result<Vec<AssignmentRow>> {
    read_rows(path)
}

/// Rebuilds the assignment against `inst`, matching rows by block id.
pub fn read_assignment(path: &Path, inst: &Instance) -> Result<BalancedAssignment> {
    let index: HashMap<&str, usize> = inst
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();
    let mut flows = vec![Vec::new(); inst.len()];
    for (i, row) in read_assignment_rows(path)?.into_iter().enumerate() {
        let b = *index
            .get(row.block_id.as_str())
            .ok_or_else(|| parse_error(path, i as u64 + 2, format!("unknown block `{}`", row.block_id)))?;
        flows[b].push((row.center_index, row.persons_assigned));
    }
    Ok(BalancedAssignment::from_block_flows(flows))
}

pub fn read_centers(path: &Path) -> Result<Vec<CenterRow>> {
    let rows: Vec<CenterRow> = read_rows(path)?;
    if rows.iter().enumerate().any(|(i, r)| r.index != i) {
        return Err(Error::format(path, "center indices must be 0..k in order"));
    }
    Ok(rows)
}

pub fn read_trace(path: &Path) -> Result<Vec<IterationRecord>> {
    read_rows(path)
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

pub fn read_cells(path: &Path) -> Result<Vec<CellRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// Everything `write_outputs` produced, loaded back.
#[derive(Debug, Clone)]
pub struct ResultSet {
    pub dir: PathBuf,
    pub instance: Instance,
    pub centers: CenterSet,
    pub weights: PowerWeights,
    pub center_rows: Vec<CenterRow>,
    pub assignment: BalancedAssignment,
    pub summary: RunSummary,
    pub trace: Vec<IterationRecord>,
}

pub fn read_result_set(dir: &Path) -> Result<ResultSet> {
    let summary = read_summary(&dir.join(SUMMARY_FILE))?;
    let instance = read_blocks(&dir.join(BLOCKS_FILE), &ReadOptions::default(), summary.k)?;
    let center_rows = read_centers(&dir.join(CENTERS_FILE))?;
    if center_rows.len() != summary.k {
        return Err(Error::format(
            dir.join(CENTERS_FILE),
            format!("{} centers for k = {}", center_rows.len(), summary.k),
        ));
    }
    let centers = CenterSet::new(
        center_rows.iter().map(|r| Point2::new(r.x, r.y)).collect(),
        center_rows.iter().map(|r| r.capacity).collect(),
    )?;
    let weights = PowerWeights::new(center_rows.iter().map(|r| r.weight).collect())?;
    let assignment = read_assignment(&dir.join(ASSIGNMENT_FILE), &instance)?;
    let trace = read_trace(&dir.join(TRACE_FILE))?;
    Ok(ResultSet {
        dir: dir.to_path_buf(),
        instance,
        centers,
        weights,
        center_rows,
        assignment,
        summary,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn reads_planar_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "b.csv", "block_id,x,y,population\na,0,0,3\nb,1.5,2,0\nc,-4,1e3,7\n");
        let inst = read_blocks(&path, &ReadOptions::default(), 2).unwrap();
        assert_eq!(inst.total_population(), 10);
        assert_eq!(inst.blocks()[2].location, Point2::new(-4.0, 1000.0));
        assert_eq!(inst.blocks()[1].population, 0);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("block_id,x,y,population\na,0,0,1\nb,0,0,-1\n", 3, "negative"),
            ("block_id,x,y,population\na,0,0,1\na,1,1,1\n", 3, "duplicate"),
            ("block_id,x,y,population\na,0,zz,1\n", 2, "invalid y"),
            ("block_id,x,y,population\na,0,inf,1\n", 2, "non-finite"),
            ("block_id,x,y,population\na,0,0,1.5\n", 2, "invalid population"),
            ("id,x,y,pop\na,0,0,1\n", 1, "expected header"),
        ];
        for (i, (text, line, needle)) in cases.iter().enumerate() {
            let path = write(dir.path(), &format!("c{i}.csv"), text);
            match read_blocks(&path, &ReadOptions::default(), 1) {
                Err(Error::Parse { line: got, message, .. }) => {
                    assert_eq!(got, *line as u64, "{message}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("case {i}: {other:?}"),
            }
        }
    }

    #[test]
    fn projection_basics() {
        let a = project(-86.0, 32.0, 32.0).unwrap();
        let b = project(-86.0, 33.0, 32.0).unwrap();
        let dy = b.y - a.y;
        assert!((dy - EARTH_RADIUS_M * std::f64::consts::PI / 180.0).abs() < 1e-6);
        assert!((dy / 1000.0 - 111.2).abs() < 0.05);
        let c = project(-85.0, 32.0, 32.0).unwrap();
        assert!(((c.x - a.x) / dy - 32f64.to_radians().cos()).abs() < 1e-12);
        assert!(matches!(project(0.0, 89.5, 0.0), Err(Error::Latitude(_))));
        assert!(matches!(project(0.0, 10.0, -90.0), Err(Error::Latitude(_))));
    }

    fn haversine(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
        let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
        let dp = p2 - p1;
        let dl = (lon2 - lon1).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }

    /// Worst ratio distortion between projected and great-circle distances
    /// over random pairs of pairs drawn from the given lon/lat box.
    fn ratio_distortion(lon: std::ops::Range<f64>, lat: std::ops::Range<f64>) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.gen_range(lon.clone()), rng.gen_range(lat.clone())))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("block_id,lon,lat,population\n");
        for (i, (lon, lat)) in pts.iter().enumerate() {
            text.push_str(&format!("b{i},{lon},{lat},1\n"));
        }
        let path = write(dir.path(), "ll.csv", &text);
        let inst = read_blocks(&path, &ReadOptions { lonlat: true }, 1).unwrap();
        let planar = |i: usize, j: usize| {
            crate::model::squared_distance(inst.blocks()[i].location, inst.blocks()[j].location).sqrt()
        };
        let sphere = |i: usize, j: usize| haversine(pts[i].0, pts[i].1, pts[j].0, pts[j].1);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let (a, b, c, d) = (
                rng.gen_range(0..200),
                rng.gen_range(0..200),
                rng.gen_range(0..200),
                rng.gen_range(0..200),
            );
            if a == b || c == d {
                continue;
            }
            let planar_ratio = planar(a, b) / planar(c, d);
            let sphere_ratio = sphere(a, b) / sphere(c, d);
            worst = worst.max((planar_ratio / sphere_ratio - 1.0).abs());
        }
        worst
    }

    #[test]
    fn projected_distance_ratios_track_great_circle() {
        // Rhode Island / Delaware sized box: within 1%.
        assert!(ratio_distortion(-75.8..-75.0, 38.5..39.3) < 0.01);
        // Alabama-sized box: the east-west scale drifts by tan(lat0) per
        // radian of latitude away from the reference parallel.
        let bound = 2.0 * 32.6f64.to_radians().tan() * 2.4f64.to_radians() * 1.1;
        let d = ratio_distortion(-88.5..-85.0, 30.2..35.0);
        assert!(d < bound, "{d} vs {bound}");
    }

    #[test]
    fn lonlat_header_required_when_projecting() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "b.csv", "block_id,x,y,population\na,0,0,1\n");
        assert!(read_blocks(&path, &ReadOptions { lonlat: true }, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            ("[a-z0-9,\" ]{1,8}", -1e7f64..1e7, -1e7f64..1e7, 0u64..1_000_000), 1..20)) {
            let mut seen = std::collections::HashSet::new();
            let blocks: Vec<Block> = rows
                .into_iter()
                .filter(|(id, ..)| !id.trim().is_empty() && seen.insert(id.trim().to_string()))
                .map(|(id, x, y, p)| Block::new(id.trim(), Point2::new(x, y), p))
                .collect();
            prop_assume!(blocks.iter().map(|b| b.population).sum::<u64>() >= 1);
            let inst = Instance::new(blocks, 1).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("blocks.csv");
            write_blocks(&path, &inst).unwrap();
            let back = read_blocks(&path, &ReadOptions::default(), 1).unwrap();
            prop_assert_eq!(back, inst);
        }
    }
}

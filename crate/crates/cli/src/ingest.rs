//! Dataset ingestion from CSV files.
//!
//! Unit file header: `unit_id,stratum,treatment,outcome,x1,...,xd`, with
//! optional `score`, `household` and `angle` columns in any position. Units
//! are indexed densely in file order. Edge files have header `src,dst,w`
//! with endpoints given as `unit_id` values; an edge listed in one
//! direction only is mirrored.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use doi_core::net::{inverse_distance_network, pagerank_default};
use doi_core::{Dataset, FeatureTerm, Network, Treatment, TreatmentKind};

use crate::config::{NetworkSource, ScoreSource};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub network: NetworkSource,
    pub intercept: bool,
    pub treatment: TreatmentKind,
    pub scores: ScoreSource,
    /// Whether some feature needs unit scores.
    pub needs_scores: bool,
    /// Reject outcomes outside {0, 1}.
    pub binary_outcome: bool,
}

impl IngestOptions {
    pub fn needs_scores(features: &[FeatureTerm]) -> bool {
        features.contains(&FeatureTerm::ScoredTreatedSum)
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub unit_ids: Vec<String>,
    /// Edges that appeared in one direction only.
    pub mirrored: usize,
    /// Distinct households when the network was built from them.
    pub households: Option<usize>,
    /// Whether unit scores came from PageRank.
    pub pagerank: bool,
}

fn data_error(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Parsed unit table before the network is attached.
struct Units {
    ids: Vec<String>,
    strata: Vec<String>,
    treatment: Vec<f64>,
    outcome: Vec<f64>,
    x: Vec<Vec<f64>>,
    score: Option<Vec<f64>>,
    household: Option<Vec<String>>,
    angle: Option<Vec<f64>>,
}

fn parse_number(text: &str, column: &str, row: usize) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            data_error(format!(
                "row {row}, column `{column}`: `{text}` is not a finite number"
            ))
        })
}

fn read_units<R: Read>(reader: R) -> Result<Units, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut col: HashMap<&str, usize> = HashMap::new();
    let mut covariates: Vec<(usize, usize)> = Vec::new();
    for (pos, name) in header.iter().enumerate() {
        if col.insert(name, pos).is_some() {
            return Err(data_error(format!("duplicate column `{name}`")));
        }
        match name {
            "unit_id" | "stratum" | "treatment" | "outcome" | "score" | "household" | "angle" => {}
            _ => match name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k >= 1 => covariates.push((k, pos)),
                _ => return Err(data_error(format!("unknown column `{name}`"))),
            },
        }
    }
    for required in ["unit_id", "stratum", "treatment", "outcome"] {
        if !col.contains_key(required) {
            return Err(data_error(format!("missing column `{required}`")));
        }
    }
    covariates.sort_unstable();
    if let Some((i, &(k, _))) = covariates
        .iter()
        .enumerate()
        .find(|(i, &(k, _))| k != i + 1)
    {
        return Err(data_error(format!(
            "covariate columns must be x1..xd; found x{k} at slot {}",
            i + 1
        )));
    }
    let get = |name: &str| col.get(name).copied();
    let mut units = Units {
        ids: Vec::new(),
        strata: Vec::new(),
        treatment: Vec::new(),
        outcome: Vec::new(),
        x: Vec::new(),
        score: get("score").map(|_| Vec::new()),
        household: get("household").map(|_| Vec::new()),
        angle: get("angle").map(|_| Vec::new()),
    };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        units.ids.push(rec[get("unit_id").unwrap()].to_string());
        units.strata.push(rec[get("stratum").unwrap()].to_string());
        units.treatment.push(parse_number(
            &rec[get("treatment").unwrap()],
            "treatment",
            row,
        )?);
        units
            .outcome
            .push(parse_number(&rec[get("outcome").unwrap()], "outcome", row)?);
        units.x.push(
            covariates
                .iter()
                .map(|&(k, pos)| parse_number(&rec[pos], &format!("x{k}"), row))
                .collect::<Result<_, _>>()?,
        );
        if let (Some(v), Some(pos)) = (&mut units.score, get("score")) {
            v.push(parse_number(&rec[pos], "score", row)?);
        }
        if let (Some(v), Some(pos)) = (&mut units.household, get("household")) {
            v.push(rec[pos].to_string());
        }
        if let (Some(v), Some(pos)) = (&mut units.angle, get("angle")) {
            v.push(parse_number(&rec[pos], "angle", row)?);
        }
    }
    if units.ids.is_empty() {
        return Err(data_error("unit file has no rows"));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = units.ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(data_error(format!("duplicate unit_id `{dup}`")));
    }
    Ok(units)
}

fn read_edges<R: Read>(
    reader: R,
    index: &HashMap<&str, usize>,
) -> Result<(Network, usize), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["src", "dst", "w"] {
        return Err(data_error(format!(
            "edge file header must be src,dst,w; got {}",
            header.join(",")
        )));
    }
    let mut edges = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let unit = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| data_error(format!("edge row {row}: unknown unit_id `{s}`")))
        };
        edges.push((
            unit(&rec[0])?,
            unit(&rec[1])?,
            parse_number(&rec[2], "w", row)?,
        ));
    }
    let directed: HashSet<(usize, usize)> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let mirrored = edges
        .iter()
        .filter(|&&(i, j, _)| !directed.contains(&(j, i)))
        .count();
    let net = Network::from_edges(index.len(), edges).map_err(|e| data_error(e.to_string()))?;
    Ok((net, mirrored))
}

/// Builds a dataset from a unit table and, for edge-list networks, an edge
/// table.
pub fn ingest_readers<R: Read, E: Read>(
    units: R,
    edges: Option<E>,
    opts: &IngestOptions,
) -> Result<Ingested, CliError> {
    let units = read_units(units)?;
    let n = units.ids.len();
    let index: HashMap<&str, usize> = units
        .ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut mirrored = 0;
    let mut households = None;
    let net = match &opts.network {
        NetworkSource::Edges { .. } => {
            let edges = edges.ok_or_else(|| data_error("edge list required"))?;
            let (net, m) = read_edges(edges, &index)?;
            mirrored = m;
            net
        }
        NetworkSource::Households => {
            let labels = units.household.as_ref().ok_or_else(|| {
                data_error("network source `households` needs a `household` column")
            })?;
            let names: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
            let ids: HashMap<&str, usize> =
                names.iter().enumerate().map(|(k, s)| (*s, k)).collect();
            households = Some(names.len());
            Network::from_groups(&labels.iter().map(|s| ids[s.as_str()]).collect::<Vec<_>>())
        }
        NetworkSource::InverseDistance { cutoff, metric } => {
            let angles = units.angle.as_ref().ok_or_else(|| {
                data_error("network source `inverse_distance` needs an `angle` column")
            })?;
            inverse_distance_network(angles, *cutoff, *metric)
                .map_err(|e| data_error(e.to_string()))?
        }
        NetworkSource::Empty => Network::empty(n),
    };

    if opts.binary_outcome {
        if let Some(i) = units.outcome.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(data_error(format!(
                "unit `{}`: outcome {} is not 0 or 1 as the probit family requires",
                units.ids[i], units.outcome[i]
            )));
        }
    }
    let x: Vec<Vec<f64>> = units
        .x
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(row.len() + 1);
            if opts.intercept {
                out.push(1.0);
            }
            out.extend_from_slice(row);
            out
        })
        .collect();
    if x[0].is_empty() {
        return Err(data_error(
            "no covariates: add x1..xd columns or enable the intercept",
        ));
    }
    let treatment =
        Treatment::new(opts.treatment, units.treatment).map_err(|e| data_error(e.to_string()))?;
    let names: Vec<String> = units
        .strata
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let strata: Vec<usize> = units
        .strata
        .iter()
        .map(|s| names.binary_search(s).expect("name collected"))
        .collect();
    let mut dataset = Dataset::new(x, treatment, units.outcome, net)
        .and_then(|d| d.with_strata(strata, names))
        .map_err(|e| data_error(e.to_string()))?;

    let mut pagerank = false;
    let scores = match opts.scores {
        ScoreSource::Column => Some(units.score.ok_or_else(|| {
            data_error("scores = column but the unit file has no `score` column")
        })?),
        ScoreSource::Pagerank => None,
        ScoreSource::Auto => units.score,
        ScoreSource::None => None,
    };
    let scores = match scores {
        Some(s) => Some(s),
        None if opts.scores == ScoreSource::Pagerank
            || (opts.scores == ScoreSource::Auto && opts.needs_scores) =>
        {
            pagerank = true;
            Some(pagerank_default(dataset.net())?.scores)
        }
        None => None,
    };
    if let Some(s) = scores {
        dataset = dataset
            .with_scores(s)
            .map_err(|e| data_error(e.to_string()))?;
    }
    Ok(Ingested {
        dataset,
        unit_ids: units.ids,
        mirrored,
        households,
        pagerank,
    })
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::Io {
        context: format!("cannot open {}", path.display()),
        source: e,
    })
}

/// Reads the unit file at `data` and the network described by `opts`.
pub fn ingest_dataset(data: &Path, opts: &IngestOptions) -> Result<Ingested, CliError> {
    let edges = match &opts.network {
        NetworkSource::Edges { path } => Some(open(path)?),
        _ => None,
    };
    ingest_readers(open(data)?, edges, opts)
}

//! File formats: networks (JSON and CSV pair), limit models, cascade results,
//! trajectories, multigraphs and CSV provenance records.

use crate::cascade::CascadeResult;
use crate::configmodel::{MarkovTrajectory, Multigraph};
use crate::error::{Error, Result};
use crate::measures::LimitModel;
use crate::network::{build_network, FinancialNetwork, NodeId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub const NODES_CSV: &str = "nodes.csv";
pub const EDGES_CSV: &str = "edges.csv";

/// Serialized network. Edge order is the per-node exposure order, so a
/// round trip reproduces the network exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub recovery: f64,
    pub gamma: Vec<f64>,
    pub edges: Vec<(NodeId, NodeId, f64)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub multigraph: bool,
}

impl From<&FinancialNetwork> for NetworkFile {
    fn from(net: &FinancialNetwork) -> Self {
        NetworkFile {
            n: net.n(),
            recovery: net.recovery(),
            gamma: net.gammas().to_vec(),
            edges: net.edges().collect(),
            multigraph: net.is_multigraph(),
        }
    }
}

impl NetworkFile {
    pub fn into_network(self) -> Result<FinancialNetwork> {
        if self.gamma.len() != self.n {
            return Err(Error::LengthMismatch(self.gamma.len(), self.n));
        }
        build_network(&self.edges, self.gamma, self.recovery, self.multigraph)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_network(path: &Path) -> Result<FinancialNetwork> {
    read_json::<NetworkFile>(path)?.into_network()
}

pub fn write_network(path: &Path, net: &FinancialNetwork) -> Result<()> {
    write_json(path, &NetworkFile::from(net))
}

#[derive(Serialize, Deserialize)]
struct NodeRow {
    id: NodeId,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    src: NodeId,
    dst: NodeId,
    exposure: f64,
}

/// Writes `nodes.csv` and `edges.csv` into `dir`.
pub fn write_network_csv(dir: &Path, net: &FinancialNetwork) -> Result<()> {
    let nodes: Vec<NodeRow> = net
        .gammas()
        .iter()
        .enumerate()
        .map(|(id, &gamma)| NodeRow { id, gamma })
        .collect();
    write_table(&dir.join(NODES_CSV), &["id", "gamma"], &nodes)?;
    let edges: Vec<EdgeRow> = net
        .edges()
        .map(|(src, dst, exposure)| EdgeRow { src, dst, exposure })
        .collect();
    write_table(&dir.join(EDGES_CSV), &["src", "dst", "exposure"], &edges)
}

/// Reads the CSV pair from `dir`. Node ids must be `0..n` in order; the
/// recovery rate is not part of the pair.
pub fn read_network_csv(dir: &Path, recovery: f64, multigraph: bool) -> Result<FinancialNetwork> {
    let mut gammas = Vec::new();
    for row in csv::Reader::from_reader(open(&dir.join(NODES_CSV))?).deserialize() {
        let row: NodeRow = row?;
        if row.id != gammas.len() {
            return Err(Error::InvalidParameter(format!(
                "{NODES_CSV}: expected id {}, found {}",
                gammas.len(),
                row.id
            )));
        }
        gammas.push(row.gamma);
    }
    let edges = csv::Reader::from_reader(open(&dir.join(EDGES_CSV))?)
        .deserialize()
        .map(|r| r.map(|e: EdgeRow| (e.src, e.dst, e.exposure)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    build_network(&edges, gammas, recovery, multigraph)
}

/// Serialized limit model; `p` lists only nonzero entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub mu: Vec<(usize, usize, f64)>,
    pub p: Vec<(usize, usize, usize, f64)>,
}

impl From<&LimitModel> for ModelFile {
    fn from(model: &LimitModel) -> Self {
        ModelFile {
            mu: model.classes().iter().map(|c| (c.j, c.k, c.mu)).collect(),
            p: model.p_entries().filter(|e| e.3 != 0.0).collect(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<LimitModel> {
        LimitModel::new(
            self.mu.into_iter().map(|(j, k, m)| ((j, k), m)),
            self.p.into_iter().map(|(j, k, t, v)| ((j, k, t), v)),
        )
    }
}

pub fn read_model(path: &Path) -> Result<LimitModel> {
    read_json::<ModelFile>(path)?.into_model()
}

pub fn write_model(path: &Path, model: &LimitModel) -> Result<()> {
    write_json(path, &ModelFile::from(model))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeFile {
    pub fraction: f64,
    pub rounds_used: usize,
    #[serde(rename = "final")]
    pub final_set: Vec<NodeId>,
    pub round_sizes: Vec<usize>,
}

impl From<&CascadeResult> for CascadeFile {
    fn from(r: &CascadeResult) -> Self {
        CascadeFile {
            fraction: r.fraction(),
            rounds_used: r.rounds_used(),
            final_set: r.final_set(),
            round_sizes: r.round_sizes().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryColumn {
    pub column: String,
    pub j: usize,
    pub k: usize,
    pub theta: usize,
    pub l: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub n: usize,
    pub m: usize,
    pub t_n: usize,
    pub columns: Vec<TrajectoryColumn>,
}

/// Writes `t,D,D_minus,S_j_k_theta_l...` rows to `csv_path` and the column
/// manifest to `manifest_path`.
pub fn write_trajectory(traj: &MarkovTrajectory, csv_path: &Path, manifest_path: &Path) -> Result<()> {
    let columns: Vec<TrajectoryColumn> = traj
        .classes
        .iter()
        .map(|c| TrajectoryColumn {
            column: format!("S_{}_{}_{}_{}", c.j, c.k, c.theta, c.l),
            j: c.j,
            k: c.k,
            theta: c.theta,
            l: c.l,
        })
        .collect();
    let mut w = csv::Writer::from_writer(create(csv_path)?);
    let header = ["t", "D", "D_minus"]
        .into_iter()
        .map(str::to_owned)
        .chain(columns.iter().map(|c| c.column.clone()));
    w.write_record(header)?;
    for t in 0..=traj.steps() {
        let row = [t.to_string(), traj.d[t].to_string(), traj.d_minus[t].to_string()]
            .into_iter()
            .chain(traj.s[t].iter().map(u32::to_string));
        w.write_record(row)?;
    }
    w.flush()?;
    write_json(
        manifest_path,
        &TrajectoryManifest {
            n: traj.n,
            m: traj.m,
            t_n: traj.t_n,
            columns,
        },
    )
}

/// Edge list `src,dst,multiplicity` in increasing `(src, dst)` order.
pub fn write_multigraph(path: &Path, g: &Multigraph) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["src", "dst", "multiplicity"])?;
    for ((s, d), m) in g.multiplicities() {
        w.serialize((s, d, m))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` under an explicit header, so header-only files are possible.
pub fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    write_table_to(BufWriter::new(create(path)?), header, rows)
}

pub fn write_table_to<W: Write, T: Serialize>(writer: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar record for a CSV output. The timestamp lives only here so the CSV
/// itself is reproducible byte for byte.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub units: BTreeMap<String, String>,
    /// Run-level results that do not fit the table, such as a critical γ.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
    pub timestamp_unix: u64,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: serde_json::Value, units: &[(&str, &str)]) -> Self {
        Provenance {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config,
            units: units
                .iter()
                .map(|&(c, u)| (c.to_owned(), u.to_owned()))
                .collect(),
            extra: serde_json::Map::new(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

/// `results.csv` -> `results.provenance.json`.
pub fn provenance_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("provenance.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{assign_thresholds, run_cascade};
    use crate::configmodel::{configuration_match, markov_trajectory};
    use crate::network::DegreeSequence;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn awkward_net() -> FinancialNetwork {
        build_network(
            &[(0, 1, 0.1 + 0.2), (1, 2, 1.0 / 3.0), (2, 0, 1e-300), (0, 2, 7.0e12)],
            vec![0.0, 2.0f64.sqrt() / 10.0, 0.3],
            0.25,
            false,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = awkward_net();
        write_network(&path, &net).unwrap();
        assert_eq!(read_network(&path).unwrap(), net);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let net = awkward_net();
        write_network_csv(dir.path(), &net).unwrap();
        assert_eq!(read_network_csv(dir.path(), 0.25, false).unwrap(), net);
        let head = std::fs::read_to_string(dir.path().join(EDGES_CSV)).unwrap();
        assert!(head.starts_with("src,dst,exposure\n"));
        let head = std::fs::read_to_string(dir.path().join(NODES_CSV)).unwrap();
        assert!(head.starts_with("id,gamma\n"));
    }

    #[test]
    fn network_file_layout() {
        let v = serde_json::to_value(NetworkFile::from(&awkward_net())).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["edges"][0][1], 1);
        assert!(v.get("multigraph").is_none());
        let bad = NetworkFile {
            n: 4,
            ..NetworkFile::from(&awkward_net())
        };
        assert!(matches!(bad.into_network(), Err(Error::LengthMismatch(3, 4))));
    }

    #[test]
    fn model_and_cascade_files() {
        let dir = tempdir().unwrap();
        let model = LimitModel::new(
            [((1, 3), 0.25), ((2, 3), 0.25), ((4, 3), 0.25), ((5, 3), 0.25)],
            [((1, 3, 1), 1.0), ((2, 3, 1), 1.0), ((4, 3, 2), 0.5)],
        )
        .unwrap();
        let path = dir.path().join("model.json");
        write_model(&path, &model).unwrap();
        assert_eq!(read_model(&path).unwrap(), model);

        let r = run_cascade(&awkward_net());
        let v = serde_json::to_value(CascadeFile::from(&r)).unwrap();
        assert_eq!(v["final"], serde_json::json!(r.final_set()));
        assert_eq!(v["rounds_used"], r.rounds_used());
    }

    #[test]
    fn trajectory_and_multigraph_dumps() {
        let dir = tempdir().unwrap();
        let degrees = DegreeSequence::new(vec![2, 2, 2, 2], vec![2, 2, 2, 2]).unwrap();
        let g = configuration_match(&degrees, 5);
        let mg = dir.path().join("mg.csv");
        write_multigraph(&mg, &g).unwrap();
        let text = std::fs::read_to_string(&mg).unwrap();
        let total: usize = text
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 8);

        let net = crate::configmodel::weighted_overlay(
            &g,
            &vec![vec![1.0; 2]; 4],
            vec![0.0, 0.6, 0.6, 0.6],
            0.0,
        )
        .unwrap();
        let th = assign_thresholds(&net, 5);
        let traj = markov_trajectory(&degrees, &th, 5, false).unwrap();
        let (c, m) = (dir.path().join("t.csv"), dir.path().join("t.json"));
        write_trajectory(&traj, &c, &m).unwrap();
        let text = std::fs::read_to_string(&c).unwrap();
        assert!(text.starts_with("t,D,D_minus"));
        assert_eq!(text.lines().count(), traj.steps() + 2);
        let manifest: TrajectoryManifest = read_json(&m).unwrap();
        assert_eq!(manifest.columns.len(), traj.classes.len());
    }

    #[test]
    fn header_only_table() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_table::<(u8, u8)>(&p, &["a", "b"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n");
        assert_eq!(provenance_path(&p), dir.path().join("e.provenance.json"));
    }

    proptest! {
        #[test]
        fn arbitrary_floats_survive_json(
            ws in prop::collection::vec(1e-300f64..1e300, 1..20),
            g in prop::collection::vec(0.0f64..5.0, 2..6),
        ) {
            let n = g.len();
            let edges: Vec<_> = ws.iter().enumerate().map(|(e, &w)| (e % n, (e + 1) % n, w)).collect();
            let net = build_network(&edges, g, 0.5, true).unwrap();
            let text = serde_json::to_string(&NetworkFile::from(&net)).unwrap();
            let back: NetworkFile = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.into_network().unwrap(), net);
        }
    }
}

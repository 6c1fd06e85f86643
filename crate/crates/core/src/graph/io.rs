//! Dataset ingestion and serialization.
//!
//! Datasets are plain UTF-8 tab-separated files so they diff cleanly:
//!
//! * `nodes.tsv`  — `id <TAB> type [<TAB> f1,f2,...]`
//! * `edges.tsv`  — `src_id <TAB> dst_id <TAB> relation`
//! * `labels.tsv` — `id <TAB> class`
//! * `splits.tsv` — `id <TAB> train|val|test`
//! * `descriptor.json` — name, task, target and declared relations; consumed
//!   by prompt rendering.
//!
//! Node features are optional; a type without features gets a one-hot of the
//! local index within its type.

use super::model::{GraphError, HeteroGraph, NodeType, Relation, Split, Target};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;

/// Sidecar metadata describing a dataset; also the unit prompt rendering
/// consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    /// `node-classification` or `link-prediction`.
    pub task: String,
    /// Target node type (classification) or relation name (link prediction).
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_path: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub types: Vec<TypeStat>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<RelationStat>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeStat {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationStat {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub edges: usize,
}

impl DatasetDescriptor {
    pub fn from_graph(g: &HeteroGraph) -> Self {
        let (task, target) = match g.target {
            Target::Node(t) => ("node-classification".to_string(), g.node_types[t].name.clone()),
            Target::Link(r) => ("link-prediction".to_string(), g.relations[r].name.clone()),
        };
        DatasetDescriptor {
            name: g.name.clone(),
            task,
            target,
            meta_path: None,
            types: g
                .node_types
                .iter()
                .map(|t| TypeStat {
                    name: t.name.clone(),
                    count: t.count,
                })
                .collect(),
            relations: g
                .relations
                .iter()
                .filter(|r| r.derived_from.is_none())
                .map(|r| RelationStat {
                    name: r.name.clone(),
                    src: g.node_types[r.src].name.clone(),
                    dst: g.node_types[r.dst].name.clone(),
                    edges: r.edges.len(),
                })
                .collect(),
        }
    }
}

/// Result of ingesting a dataset: the graph plus non-fatal findings.
#[derive(Debug)]
pub struct Loaded {
    pub graph: HeteroGraph,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

struct NodeTable {
    /// id -> (type index, local index)
    by_id: HashMap<String, (usize, u32)>,
    type_names: Vec<String>,
    counts: Vec<usize>,
    /// per type: rows in local order, None when the node carried no features
    feats: Vec<Vec<Option<Vec<f64>>>>,
}

fn parse_nodes(path: &Path) -> Result<NodeTable, GraphError> {
    let text = read(path)?;
    let fname = file_name(path);
    let mut tab = NodeTable {
        by_id: HashMap::new(),
        type_names: Vec::new(),
        counts: Vec::new(),
        feats: Vec::new(),
    };
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(GraphError::Parse {
                file: fname.clone(),
                line: lineno,
                msg: format!("expected 2 or 3 tab-separated columns, got {}", cols.len()),
            });
        }
        let (id, tname) = (cols[0].trim(), cols[1].trim());
        if id.is_empty() || tname.is_empty() {
            return Err(GraphError::Parse {
                file: fname.clone(),
                line: lineno,
                msg: "empty id or type".into(),
            });
        }
        let tidx = match tab.type_names.iter().position(|n| n == tname) {
            Some(i) => i,
            None => {
                tab.type_names.push(tname.to_string());
                tab.counts.push(0);
                tab.feats.push(Vec::new());
                tab.type_names.len() - 1
            }
        };
        let local = tab.counts[tidx] as u32;
        if tab
            .by_id
            .insert(id.to_string(), (tidx, local))
            .is_some()
        {
            return Err(GraphError::Parse {
                file: fname.clone(),
                line: lineno,
                msg: format!("duplicate node id {id}"),
            });
        }
        tab.counts[tidx] += 1;
        let feat = match cols.get(2) {
            Some(f) if !f.trim().is_empty() => {
                let vals: Result<Vec<f64>, _> =
                    f.split(',').map(|v| v.trim().parse::<f64>()).collect();
                Some(vals.map_err(|e| GraphError::Parse {
                    file: fname.clone(),
                    line: lineno,
                    msg: format!("bad feature value: {e}"),
                })?)
            }
            _ => None,
        };
        tab.feats[tidx].push(feat);
    }
    if tab.by_id.is_empty() {
        return Err(GraphError::Schema(format!("{fname} declares no nodes")));
    }
    Ok(tab)
}

fn build_features(tab: &NodeTable) -> Result<Vec<Array2<f64>>, GraphError> {
    let mut out = Vec::with_capacity(tab.type_names.len());
    for (tidx, rows) in tab.feats.iter().enumerate() {
        let present = rows.iter().filter(|r| r.is_some()).count();
        if present == 0 {
            // One-hot of the local index within the type.
            let n = tab.counts[tidx];
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                m[(i, i)] = 1.0;
            }
            out.push(m);
        } else if present == rows.len() {
            let dim = rows[0].as_ref().unwrap().len();
            let mut m = Array2::zeros((rows.len(), dim));
            for (i, r) in rows.iter().enumerate() {
                let r = r.as_ref().unwrap();
                if r.len() != dim {
                    return Err(GraphError::Schema(format!(
                        "inconsistent feature width for type {}: {} vs {}",
                        tab.type_names[tidx],
                        r.len(),
                        dim
                    )));
                }
                for (j, v) in r.iter().enumerate() {
                    m[(i, j)] = *v;
                }
            }
            out.push(m);
        } else {
            return Err(GraphError::Schema(format!(
                "type {} mixes nodes with and without features",
                tab.type_names[tidx]
            )));
        }
    }
    Ok(out)
}

/// Ingest a dataset from its four tab-separated files.
///
/// Relations are discovered from the edge file; the target type is the type
/// of the labelled nodes. Use [`load_dir`] to also honor a descriptor that
/// declares relations (so empty relations survive) and the task target.
pub fn load_dataset(
    node_file: &Path,
    edge_file: &Path,
    label_file: &Path,
    split_file: &Path,
) -> Result<Loaded, GraphError> {
    load_with_descriptor(node_file, edge_file, label_file, split_file, None)
}

/// Load `nodes.tsv`, `edges.tsv`, `labels.tsv`, `splits.tsv` and an optional
/// `descriptor.json` from one directory.
pub fn load_dir(dir: &Path) -> Result<Loaded, GraphError> {
    let desc_path = dir.join("descriptor.json");
    let desc = if desc_path.exists() {
        let text = read(&desc_path)?;
        Some(
            serde_json::from_str::<DatasetDescriptor>(&text).map_err(|e| GraphError::Parse {
                file: file_name(&desc_path),
                line: e.line(),
                msg: e.to_string(),
            })?,
        )
    } else {
        None
    };
    load_with_descriptor(
        &dir.join("nodes.tsv"),
        &dir.join("edges.tsv"),
        &dir.join("labels.tsv"),
        &dir.join("splits.tsv"),
        desc,
    )
}

pub fn load_with_descriptor(
    node_file: &Path,
    edge_file: &Path,
    label_file: &Path,
    split_file: &Path,
    desc: Option<DatasetDescriptor>,
) -> Result<Loaded, GraphError> {
    let tab = parse_nodes(node_file)?;
    let features = build_features(&tab)?;
    let mut warnings = Vec::new();

    // Relations declared up front keep their position even with zero edges.
    let mut relations: Vec<Relation> = Vec::new();
    let mut rel_by_name: HashMap<String, usize> = HashMap::new();
    if let Some(d) = &desc {
        for rs in &d.relations {
            let src = tab
                .type_names
                .iter()
                .position(|n| *n == rs.src)
                .ok_or_else(|| {
                    GraphError::Schema(format!(
                        "descriptor relation {} references unknown type {}",
                        rs.name, rs.src
                    ))
                })?;
            let dst = tab
                .type_names
                .iter()
                .position(|n| *n == rs.dst)
                .ok_or_else(|| {
                    GraphError::Schema(format!(
                        "descriptor relation {} references unknown type {}",
                        rs.name, rs.dst
                    ))
                })?;
            rel_by_name.insert(rs.name.clone(), relations.len());
            relations.push(Relation {
                name: rs.name.clone(),
                src,
                dst,
                edges: Vec::new(),
                derived_from: None,
                reverse: None,
            });
        }
    }

    let etext = read(edge_file)?;
    let efname = file_name(edge_file);
    for (lineno, line) in etext.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(GraphError::Parse {
                file: efname.clone(),
                line: lineno,
                msg: format!("expected 3 tab-separated columns, got {}", cols.len()),
            });
        }
        let (sid, did, rname) = (cols[0].trim(), cols[1].trim(), cols[2].trim());
        let &(stype, sloc) = tab.by_id.get(sid).ok_or_else(|| {
            GraphError::Schema(format!(
                "edge at {efname}:{lineno} references node {sid} absent from the node file"
            ))
        })?;
        let &(dtype, dloc) = tab.by_id.get(did).ok_or_else(|| {
            GraphError::Schema(format!(
                "edge at {efname}:{lineno} references node {did} absent from the node file"
            ))
        })?;
        let ridx = match rel_by_name.get(rname) {
            Some(&i) => {
                let r = &relations[i];
                if r.src != stype || r.dst != dtype {
                    return Err(GraphError::Schema(format!(
                        "edge at {efname}:{lineno} gives relation {rname} signature {}->{} \
                         but it was declared {}->{}",
                        tab.type_names[stype],
                        tab.type_names[dtype],
                        tab.type_names[r.src],
                        tab.type_names[r.dst]
                    )));
                }
                i
            }
            None => {
                rel_by_name.insert(rname.to_string(), relations.len());
                relations.push(Relation {
                    name: rname.to_string(),
                    src: stype,
                    dst: dtype,
                    edges: Vec::new(),
                    derived_from: None,
                    reverse: None,
                });
                relations.len() - 1
            }
        };
        relations[ridx].edges.push((sloc, dloc));
    }
    for r in &relations {
        if r.edges.is_empty() {
            warnings.push(format!("relation {} has no edges", r.name));
        }
    }

    // Labels determine the target type unless the descriptor names a link task.
    let ltext = read(label_file)?;
    let lfname = file_name(label_file);
    let mut labeled: Vec<(usize, u32, usize, usize)> = Vec::new(); // (type, local, class, line)
    for (lineno, line) in ltext.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(GraphError::Parse {
                file: lfname.clone(),
                line: lineno,
                msg: format!("expected 2 tab-separated columns, got {}", cols.len()),
            });
        }
        let id = cols[0].trim();
        let class: usize = cols[1].trim().parse().map_err(|e| GraphError::Parse {
            file: lfname.clone(),
            line: lineno,
            msg: format!("bad class: {e}"),
        })?;
        let &(t, loc) = tab.by_id.get(id).ok_or_else(|| {
            GraphError::Schema(format!("label for unknown node {id} at {lfname}:{lineno}"))
        })?;
        labeled.push((t, loc, class, lineno));
    }

    let link_target = desc.as_ref().and_then(|d| {
        if d.task == "link-prediction" {
            Some(d.target.clone())
        } else {
            None
        }
    });

    let (target, labels, num_classes, split) = if let Some(rel_name) = link_target {
        let ridx = rel_by_name.get(&rel_name).copied().ok_or_else(|| {
            GraphError::Schema(format!("descriptor targets unknown relation {rel_name}"))
        })?;
        (Target::Link(ridx), Vec::new(), 0, Split::default())
    } else {
        if labeled.is_empty() {
            return Err(GraphError::Schema(format!("{lfname} declares no labels")));
        }
        let ttype = labeled[0].0;
        if let Some((t, _, _, line)) = labeled.iter().find(|(t, ..)| *t != ttype) {
            return Err(GraphError::Schema(format!(
                "labels span multiple types ({} and {}, see {lfname}:{line})",
                tab.type_names[ttype], tab.type_names[*t]
            )));
        }
        if let Some(d) = &desc {
            if d.task == "node-classification" && d.target != tab.type_names[ttype] {
                return Err(GraphError::Schema(format!(
                    "descriptor target {} does not match labelled type {}",
                    d.target, tab.type_names[ttype]
                )));
            }
        }
        let n = tab.counts[ttype];
        let mut labels = vec![usize::MAX; n];
        for &(_, loc, class, line) in &labeled {
            if labels[loc as usize] != usize::MAX {
                return Err(GraphError::Parse {
                    file: lfname.clone(),
                    line,
                    msg: "node labelled twice".into(),
                });
            }
            labels[loc as usize] = class;
        }
        if labels.iter().any(|&c| c == usize::MAX) {
            return Err(GraphError::Schema(format!(
                "not every node of target type {} is labelled",
                tab.type_names[ttype]
            )));
        }
        let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;

        let stext = read(split_file)?;
        let sfname = file_name(split_file);
        let mut split = Split::default();
        for (lineno, line) in stext.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(GraphError::Parse {
                    file: sfname.clone(),
                    line: lineno,
                    msg: format!("expected 2 tab-separated columns, got {}", cols.len()),
                });
            }
            let id = cols[0].trim();
            let &(t, loc) = tab.by_id.get(id).ok_or_else(|| {
                GraphError::Schema(format!("split names unknown node {id} at {sfname}:{lineno}"))
            })?;
            if t != ttype {
                return Err(GraphError::Schema(format!(
                    "split id {id} is of type {} but the target type is {}",
                    tab.type_names[t], tab.type_names[ttype]
                )));
            }
            match cols[1].trim() {
                "train" => split.train.push(loc),
                "val" => split.val.push(loc),
                "test" => split.test.push(loc),
                other => {
                    return Err(GraphError::Parse {
                        file: sfname.clone(),
                        line: lineno,
                        msg: format!("unknown split {other}"),
                    })
                }
            }
        }
        (Target::Node(ttype), labels, num_classes, split)
    };

    let graph = HeteroGraph {
        name: desc
            .as_ref()
            .map(|d| d.name.clone())
            .unwrap_or_else(|| {
                node_file
                    .parent()
                    .and_then(|p| p.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            }),
        node_types: tab
            .type_names
            .iter()
            .zip(tab.counts.iter())
            .zip(features)
            .map(|((name, &count), features)| NodeType {
                name: name.clone(),
                count,
                features,
            })
            .collect(),
        relations,
        target,
        labels,
        num_classes,
        split,
    };
    graph.validate()?;
    Ok(Loaded { graph, warnings })
}

/// Write a dataset directory. Node ids are `<type>:<local index>`; only
/// declared (non-derived) relations are emitted.
pub fn write_dataset(g: &HeteroGraph, dir: &Path) -> Result<(), GraphError> {
    let werr = |path: &Path, e: std::io::Error| GraphError::Io {
        path: path.display().to_string(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(|e| werr(dir, e))?;

    let id_of = |t: usize, i: u32| format!("{}:{}", g.node_types[t].name, i);

    let mut nodes = String::new();
    for (t, nt) in g.node_types.iter().enumerate() {
        for i in 0..nt.count {
            let feats: Vec<String> = nt
                .features
                .row(i)
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            nodes.push_str(&format!(
                "{}\t{}\t{}\n",
                id_of(t, i as u32),
                nt.name,
                feats.join(",")
            ));
        }
    }
    let p = dir.join("nodes.tsv");
    fs::write(&p, nodes).map_err(|e| werr(&p, e))?;

    let mut edges = String::new();
    for r in g.relations.iter().filter(|r| r.derived_from.is_none()) {
        for &(s, d) in &r.edges {
            edges.push_str(&format!(
                "{}\t{}\t{}\n",
                id_of(r.src, s),
                id_of(r.dst, d),
                r.name
            ));
        }
    }
    let p = dir.join("edges.tsv");
    fs::write(&p, edges).map_err(|e| werr(&p, e))?;

    let mut labels = String::new();
    let mut splits = String::new();
    if let Target::Node(t) = g.target {
        for (i, c) in g.labels.iter().enumerate() {
            labels.push_str(&format!("{}\t{}\n", id_of(t, i as u32), c));
        }
        for (ids, part) in [
            (&g.split.train, "train"),
            (&g.split.val, "val"),
            (&g.split.test, "test"),
        ] {
            for &i in ids.iter() {
                splits.push_str(&format!("{}\t{}\n", id_of(t, i), part));
            }
        }
    }
    let p = dir.join("labels.tsv");
    fs::write(&p, labels).map_err(|e| werr(&p, e))?;
    let p = dir.join("splits.tsv");
    fs::write(&p, splits).map_err(|e| werr(&p, e))?;

    let desc = DatasetDescriptor::from_graph(g);
    let p = dir.join("descriptor.json");
    fs::write(&p, serde_json::to_string_pretty(&desc).unwrap()).map_err(|e| werr(&p, e))?;
    Ok(())
}

/// One row of the relation summary: `Relation(A-B)  #A  #B  #A-B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub relation: String,
    pub src_type: String,
    pub dst_type: String,
    pub src_count: usize,
    pub dst_count: usize,
    pub edge_count: usize,
}

pub fn summary(g: &HeteroGraph) -> Vec<SummaryRow> {
    g.relations
        .iter()
        .filter(|r| r.derived_from.is_none())
        .map(|r| SummaryRow {
            relation: r.name.clone(),
            src_type: g.node_types[r.src].name.clone(),
            dst_type: g.node_types[r.dst].name.clone(),
            src_count: g.node_types[r.src].count,
            dst_count: g.node_types[r.dst].count,
            edge_count: r.edges.len(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_files(dir: &Path, nodes: &str, edges: &str, labels: &str, splits: &str) {
        fs::write(dir.join("nodes.tsv"), nodes).unwrap();
        fs::write(dir.join("edges.tsv"), edges).unwrap();
        fs::write(dir.join("labels.tsv"), labels).unwrap();
        fs::write(dir.join("splits.tsv"), splits).unwrap();
    }

    const NODES: &str = "a1\tA\na2\tA\np1\tP\np2\tP\np3\tP\ns1\tS\n";
    const EDGES: &str = "a1\tp1\tA-P\na1\tp2\tA-P\na2\tp3\tA-P\ns1\tp1\tS-P\ns1\tp2\tS-P\ns1\tp3\tS-P\n";
    const LABELS: &str = "p1\t0\np2\t1\np3\t0\n";
    const SPLITS: &str = "p1\ttrain\np2\tval\np3\ttest\n";

    #[test]
    fn loads_a_small_dataset() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), NODES, EDGES, LABELS, SPLITS);
        let loaded = load_dir(dir.path()).unwrap();
        let g = &loaded.graph;
        assert_eq!(g.node_types.len(), 3);
        assert_eq!(g.relations.len(), 2);
        assert_eq!(g.relations[0].edges.len(), 3);
        assert_eq!(g.num_classes, 2);
        assert_eq!(g.target, Target::Node(g.type_index("P").unwrap()));
        // No features given: one-hot of local index.
        assert_eq!(g.node_types[0].features.dim(), (2, 2));
    }

    #[test]
    fn unknown_node_in_edge_file_names_the_id() {
        let dir = tempfile::tempdir().unwrap();
        write_files(
            dir.path(),
            NODES,
            "a1\tp9\tA-P\n",
            LABELS,
            SPLITS,
        );
        let err = load_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("p9"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), NODES, "a1 p1 A-P\n", LABELS, SPLITS);
        match load_dir(dir.path()) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn overlapping_split_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_files(
            dir.path(),
            NODES,
            EDGES,
            LABELS,
            "p1\ttrain\np1\tval\np2\tval\np3\ttest\n",
        );
        let err = load_dir(dir.path()).unwrap_err();
        assert!(matches!(err, GraphError::Validation(_)), "{err}");
    }

    #[test]
    fn declared_relation_with_no_edges_warns() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), NODES, EDGES, LABELS, SPLITS);
        let desc = DatasetDescriptor {
            name: "t".into(),
            task: "node-classification".into(),
            target: "P".into(),
            meta_path: None,
            types: vec![],
            relations: vec![
                RelationStat {
                    name: "A-P".into(),
                    src: "A".into(),
                    dst: "P".into(),
                    edges: 3,
                },
                RelationStat {
                    name: "S-A".into(),
                    src: "S".into(),
                    dst: "A".into(),
                    edges: 0,
                },
            ],
        };
        fs::write(
            dir.path().join("descriptor.json"),
            serde_json::to_string(&desc).unwrap(),
        )
        .unwrap();
        let loaded = load_dir(dir.path()).unwrap();
        assert_eq!(loaded.graph.relations.len(), 3);
        assert_eq!(loaded.graph.relation_index("S-A"), Some(1));
        assert!(loaded.warnings.iter().any(|w| w.contains("S-A")));
    }

    #[test]
    fn round_trip_preserves_counts_and_adjacency() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), NODES, EDGES, LABELS, SPLITS);
        let g1 = load_dir(dir.path()).unwrap().graph;
        let out = tempfile::tempdir().unwrap();
        write_dataset(&g1, out.path()).unwrap();
        let g2 = load_dir(out.path()).unwrap().graph;
        assert_eq!(g1.node_types.len(), g2.node_types.len());
        for (a, b) in g1.node_types.iter().zip(&g2.node_types) {
            assert_eq!(a.count, b.count);
        }
        for (a, b) in g1.relations.iter().zip(&g2.relations) {
            use std::collections::HashSet;
            let ea: HashSet<_> = a.edges.iter().copied().collect();
            let eb: HashSet<_> = b.edges.iter().copied().collect();
            assert_eq!(ea, eb, "adjacency of {} changed", a.name);
        }
        assert_eq!(g1.labels, g2.labels);
    }
}

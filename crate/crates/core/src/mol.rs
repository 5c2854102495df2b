//! Molecule structure files, dataset manifests, and atom typing.
//!
//! The structure format is plain text, one atom per line:
//! `name x y z charge radius type_label`, with `#` starting a comment.
//! Dataset manifests are CSV with header `name,structure_file,dG_exp`;
//! structure paths are resolved relative to the manifest's directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One atom of a solute: position in A, partial charge in e, van der Waals
/// radius in A, and its type label / index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub position: [f64; 3],
    pub charge: f64,
    pub radius: f64,
    pub type_label: String,
    pub type_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub name: String,
    pub atoms: Vec<Atom>,
}

impl Molecule {
    /// Number of distinct atom types actually used, assuming indices are
    /// contiguous starting at zero.
    pub fn num_types(&self) -> usize {
        self.atoms
            .iter()
            .map(|a| a.type_index + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn max_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.radius).fold(0.0, f64::max)
    }

    /// Serialize back to the structure-file text format.
    pub fn to_structure_text(&self) -> String {
        let mut out = String::new();
        for a in &self.atoms {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                a.name, a.position[0], a.position[1], a.position[2], a.charge, a.radius,
                a.type_label
            ));
        }
        out
    }
}

/// Maps a type label to `(type_index, atomic_radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeTable {
    entries: BTreeMap<String, (usize, f64)>,
}

impl TypeTable {
    pub fn new(entries: &[(&str, f64)]) -> Self {
        let map = entries
            .iter()
            .enumerate()
            .map(|(i, (label, r))| (label.to_string(), (i, *r)))
            .collect();
        TypeTable { entries: map }
    }

    /// H, C and O radii set to 1.2, 1.7 and 1.5 A. Other elements must be
    /// supplied through a user table; unknown labels fail loudly.
    pub fn default_hco() -> Self {
        TypeTable::new(&[("H", 1.2), ("C", 1.7), ("O", 1.5)])
    }

    /// Parse a user table: one `label radius` pair per line, index order is
    /// file order. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut index = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected `label radius`, got {} fields", fields.len()),
                });
            }
            let radius: f64 = fields[1].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("non-numeric radius {:?}", fields[1]),
            })?;
            if entries.insert(fields[0].to_string(), (index, radius)).is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("duplicate label {:?}", fields[0]),
                });
            }
            index += 1;
        }
        Ok(TypeTable { entries })
    }

    pub fn lookup(&self, label: &str) -> Option<(usize, f64)> {
        self.entries.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A set of molecules with experimental solvation free energies (kcal/mol).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub family_label: String,
    pub entries: Vec<(Molecule, f64)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest type index in use anywhere in the dataset, plus one.
    pub fn num_types(&self) -> usize {
        self.entries.iter().map(|(m, _)| m.num_types()).max().unwrap_or(0)
    }

    /// Renumbers type indices so every molecule shares one contiguous
    /// numbering over the labels used anywhere in the dataset, in table
    /// order. Returns the shared type count.
    pub fn harmonize_types(&mut self, table: &TypeTable) -> Result<usize> {
        let mut used: Vec<usize> = Vec::new();
        for (m, _) in &self.entries {
            for atom in &m.atoms {
                let (idx, _) = table
                    .lookup(&atom.type_label)
                    .ok_or_else(|| Error::UnknownTypeLabel(atom.type_label.clone()))?;
                if !used.contains(&idx) {
                    used.push(idx);
                }
            }
        }
        used.sort_unstable();
        for (m, _) in self.entries.iter_mut() {
            for atom in m.atoms.iter_mut() {
                let (idx, radius) = table.lookup(&atom.type_label).unwrap();
                atom.type_index = used.iter().position(|&u| u == idx).unwrap();
                atom.radius = radius;
            }
        }
        Ok(used.len())
    }
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("non-numeric {what} {field:?}"),
    })
}

/// Parse a structure file. One atom per record, in file order; type indices
/// are assigned per distinct label, in order of first appearance.
pub fn parse_molecule(name: &str, text: &str) -> Result<Molecule> {
    let mut atoms = Vec::new();
    let mut label_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut order = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = lineno + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let position = [
            parse_f64(fields[1], "x", n)?,
            parse_f64(fields[2], "y", n)?,
            parse_f64(fields[3], "z", n)?,
        ];
        let charge = parse_f64(fields[4], "charge", n)?;
        let radius = parse_f64(fields[5], "radius", n)?;
        if !position.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                line: n,
                msg: "non-finite position".into(),
            });
        }
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::Parse {
                line: n,
                msg: format!("radius must be positive, got {radius}"),
            });
        }
        let label = fields[6].to_string();
        let next = label_index.len();
        let type_index = *label_index.entry(label.clone()).or_insert_with(|| {
            order = next;
            next
        });
        atoms.push(Atom {
            name: fields[0].to_string(),
            position,
            charge,
            radius,
            type_label: label,
            type_index,
        });
    }
    if atoms.is_empty() {
        return Err(Error::EmptyMolecule);
    }
    Ok(Molecule {
        name: name.to_string(),
        atoms,
    })
}

/// Re-type a molecule against a table: atoms take the table's index and
/// radius. Every label in the molecule must appear in the table.
pub fn assign_type_indices(m: &Molecule, table: &TypeTable) -> Result<Molecule> {
    let mut out = m.clone();
    // Compact indices to the contiguous set of labels actually used, keeping
    // the table's relative order.
    let mut used: Vec<usize> = Vec::new();
    for atom in &m.atoms {
        let (idx, _) = table
            .lookup(&atom.type_label)
            .ok_or_else(|| Error::UnknownTypeLabel(atom.type_label.clone()))?;
        if !used.contains(&idx) {
            used.push(idx);
        }
    }
    used.sort_unstable();
    for atom in out.atoms.iter_mut() {
        let (idx, radius) = table.lookup(&atom.type_label).unwrap();
        atom.type_index = used.iter().position(|&u| u == idx).unwrap();
        atom.radius = radius;
    }
    Ok(out)
}

/// Parse a dataset manifest and load the referenced structure files.
pub fn parse_dataset(manifest_path: &Path, table: Option<&TypeTable>) -> Result<Dataset> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::Io {
        path: manifest_path.to_path_buf(),
        source: e,
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let family = manifest_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset_text(&text, base, &family, table)
}

/// Manifest parsing against an explicit base directory (callers that already
/// hold the CSV text).
pub fn parse_dataset_text(
    manifest: &str,
    base_path: &Path,
    family_label: &str,
    table: Option<&TypeTable>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(manifest.as_bytes());
    let mut entries: Vec<(Molecule, f64)> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: row + 2,
            msg: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line: row + 2,
                msg: format!("expected 3 columns, got {}", record.len()),
            });
        }
        let name = record[0].to_string();
        if entries.iter().any(|(m, _)| m.name == name) {
            return Err(Error::DuplicateEntry(name));
        }
        let path = base_path.join(&record[1]);
        let dg_exp = parse_f64(&record[2], "dG_exp", row + 2)?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let mut mol = parse_molecule(&name, &text)?;
        if let Some(table) = table {
            mol = assign_type_indices(&mol, table)?;
        }
        entries.push((mol, dg_exp));
    }
    let mut ds = Dataset {
        family_label: family_label.to_string(),
        entries,
    };
    if let Some(table) = table {
        ds.harmonize_types(table)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_record() {
        let m = parse_molecule("one", "C1 0.0 0.0 0.0 -0.1 1.7 C").unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].charge, -0.1);
        assert_eq!(m.atoms[0].radius, 1.7);
        assert_eq!(m.atoms[0].type_index, 0);
    }

    #[test]
    fn bad_radius_names_line() {
        let err = parse_molecule("bad", "C1 0 0 0 0.0 abc C").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn shared_label_shares_index() {
        let text = "H1 0 0 0 0.1 1.2 H\nC1 1 0 0 -0.2 1.7 C\nH2 2 0 0 0.1 1.2 H";
        let m = parse_molecule("m", text).unwrap();
        assert_eq!(m.atoms[0].type_index, m.atoms[2].type_index);
        assert_ne!(m.atoms[0].type_index, m.atoms[1].type_index);
        assert_eq!(m.num_types(), 2);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let text = "# header\n\nC1 0 0 0 0.0 1.7 C # trailing\n";
        let m = parse_molecule("m", text).unwrap();
        assert_eq!(m.atoms.len(), 1);
    }

    #[test]
    fn empty_molecule_rejected() {
        assert!(matches!(
            parse_molecule("m", "# nothing"),
            Err(Error::EmptyMolecule)
        ));
    }

    #[test]
    fn default_table_radii() {
        let text = "H1 0 0 0 0.1 1.0 H\nC1 1 0 0 -0.2 1.0 C\nO1 2 0 0 0.1 1.0 O";
        let m = parse_molecule("m", text).unwrap();
        let typed = assign_type_indices(&m, &TypeTable::default_hco()).unwrap();
        let radii: Vec<f64> = typed.atoms.iter().map(|a| a.radius).collect();
        assert_eq!(radii, vec![1.2, 1.7, 1.5]);
    }

    #[test]
    fn single_label_is_type_zero() {
        let m = parse_molecule("m", "C1 0 0 0 0.0 1.7 C\nC2 1 0 0 0.0 1.7 C").unwrap();
        let typed = assign_type_indices(&m, &TypeTable::default_hco()).unwrap();
        assert_eq!(typed.num_types(), 1);
        assert!(typed.atoms.iter().all(|a| a.type_index == 0));
    }

    #[test]
    fn unknown_label_fails() {
        let m = parse_molecule("m", "N1 0 0 0 0.0 1.5 N").unwrap();
        match assign_type_indices(&m, &TypeTable::default_hco()) {
            Err(Error::UnknownTypeLabel(label)) => assert_eq!(label, "N"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_partition_covers_every_atom() {
        let text = "H1 0 0 0 0.1 1.2 H\nC1 1 0 0 -0.2 1.7 C\nH2 2 0 0 0.1 1.2 H\nO1 3 0 0 0.0 1.5 O";
        let m = parse_molecule("m", text).unwrap();
        let nt = m.num_types();
        let count: usize = (0..nt)
            .map(|j| m.atoms.iter().filter(|a| a.type_index == j).count())
            .sum();
        assert_eq!(count, m.atoms.len());
    }

    #[test]
    fn round_trip() {
        let text = "H1 0.5 -1.25 3.0 0.417 1.2 H\nO1 0.0 0.0 0.0 -0.834 1.5 O";
        let m = parse_molecule("water-ish", text).unwrap();
        let again = parse_molecule("water-ish", &m.to_structure_text()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn dataset_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ethane.xyzqr"), "C1 0 0 0 0.0 1.7 C\nC2 1.5 0 0 0.0 1.7 C").unwrap();
        let manifest = "name,structure_file,dG_exp\nethane,ethane.xyzqr,1.83\n";
        let ds = parse_dataset_text(manifest, dir.path(), "alkane", None).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.entries[0].1, 1.83);
        assert_eq!(ds.entries[0].0.atoms.len(), 2);
    }

    #[test]
    fn empty_manifest_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let ds = parse_dataset_text("name,structure_file,dG_exp\n", dir.path(), "x", None).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn duplicate_name_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("e.xyzqr"), "C1 0 0 0 0.0 1.7 C").unwrap();
        let manifest = "name,structure_file,dG_exp\nethane,e.xyzqr,1.83\nethane,e.xyzqr,1.83\n";
        assert!(matches!(
            parse_dataset_text(manifest, dir.path(), "x", None),
            Err(Error::DuplicateEntry(_))
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = "name,structure_file,dG_exp\nethane,missing.xyzqr,1.83\n";
        match parse_dataset_text(manifest, dir.path(), "x", None) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("missing.xyzqr")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn user_type_table() {
        let table = TypeTable::parse("C 1.7\nN 1.55 # amide\n").unwrap();
        assert_eq!(table.lookup("N"), Some((1, 1.55)));
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn dataset_types_are_harmonized() {
        let table = TypeTable::default_hco();
        let carbon_only = assign_type_indices(
            &parse_molecule("a", "C1 0 0 0 0.0 1.7 C").unwrap(),
            &table,
        )
        .unwrap();
        let mixed = assign_type_indices(
            &parse_molecule("b", "H1 0 0 0 0.0 1.2 H\nC1 1 0 0 0.0 1.7 C").unwrap(),
            &table,
        )
        .unwrap();
        // per-molecule compaction gives carbon index 0 in one and 1 in the other
        assert_eq!(carbon_only.atoms[0].type_index, 0);
        assert_eq!(mixed.atoms[1].type_index, 1);

        let mut ds = Dataset {
            family_label: "x".into(),
            entries: vec![(carbon_only, 0.0), (mixed, 0.0)],
        };
        let nt = ds.harmonize_types(&table).unwrap();
        assert_eq!(nt, 2);
        assert_eq!(ds.entries[0].0.atoms[0].type_index, 1);
        assert_eq!(ds.entries[1].0.atoms[0].type_index, 0);
        assert_eq!(ds.entries[1].0.atoms[1].type_index, 1);
        assert_eq!(ds.num_types(), 2);
    }
}

//! File helpers shared by the command-line tools.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::graph::{parse_edge_list, Graph, ParseReport};

/// Writes `path` through a temporary file in the same directory that is
/// renamed into place once `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<(Graph, ParseReport)> {
    let file = fs::File::open(path)?;
    parse_edge_list(std::io::BufReader::new(file))
}

/// Reads whitespace-separated node-token pairs, one per line, resolving
/// tokens through the labels of `g`.
pub fn read_pairs<R: BufRead>(reader: R, g: &Graph) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 2 tokens, found {}", toks.len()),
            });
        }
        let resolve = |t: &str| {
            g.node_id(t).ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("unknown node '{t}'"),
            })
        };
        pairs.push((resolve(toks[0])?, resolve(toks[1])?));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_edge_str;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        fs::write(&path, "old").unwrap();
        write_atomic(&path, |w| w.write_all(b"new\n")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "new\n");
    }

    #[test]
    fn failed_body_leaves_target_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        fs::write(&path, "old").unwrap();
        let res = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(std::io::Error::other("boom"))
        });
        assert!(res.is_err());
        assert_eq!(fs::read_to_string(&path).unwrap(), "old");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn pairs_resolve_labels() {
        let g = parse_edge_str("a b\nb c\n").unwrap().0;
        let pairs = read_pairs("# header\nc a\n\nb b\n".as_bytes(), &g).unwrap();
        assert_eq!(pairs, vec![(2, 0), (1, 1)]);
        assert!(read_pairs("a z\n".as_bytes(), &g).is_err());
        assert!(matches!(read_pairs("a\n".as_bytes(), &g), Err(Error::Parse { line: 1, .. })));
    }
}

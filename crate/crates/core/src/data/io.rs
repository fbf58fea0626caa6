use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::dataset::{Interaction, InteractionDataset, InteractionLog, Split, SplitBoundaries};
use crate::error::{Error, Result};

struct RawRow {
    user: u64,
    item: u64,
    rating: f64,
    timestamp: i64,
    extra: Vec<String>,
}

fn parse_field<T: FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("invalid {name} `{s}`"),
    })
}

fn parse_rows(path: &Path, extra_fields: usize) -> Result<Vec<RawRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 + extra_fields {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected {} tab-separated fields, found {}", 4 + extra_fields, fields.len()),
            });
        }
        let rating: f64 = parse_field(path, line, "rating", fields[2])?;
        if !rating.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("non-finite rating `{}`", fields[2]),
            });
        }
        let timestamp: u64 = parse_field(path, line, "timestamp", fields[3])?;
        rows.push(RawRow {
            user: parse_field(path, line, "user id", fields[0])?,
            item: parse_field(path, line, "item id", fields[1])?,
            rating,
            timestamp: i64::try_from(timestamp).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: "timestamp out of range".into(),
            })?,
            extra: fields[4..].iter().map(|s| s.trim().to_string()).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(rows)
}

fn dense_ids(raw: impl Iterator<Item = u64>) -> (Vec<u64>, HashMap<u64, usize>) {
    let ids: Vec<u64> = raw.collect::<BTreeSet<_>>().into_iter().collect();
    let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    (ids, index)
}

fn densify(rows: &[RawRow]) -> InteractionLog {
    let (user_ids, user_index) = dense_ids(rows.iter().map(|r| r.user));
    let (item_ids, item_index) = dense_ids(rows.iter().map(|r| r.item));
    let interactions = rows
        .iter()
        .map(|r| Interaction {
            user: user_index[&r.user],
            item: item_index[&r.item],
            rating: r.rating,
            timestamp: r.timestamp,
        })
        .collect();
    InteractionLog {
        num_users: user_ids.len(),
        num_items: item_ids.len(),
        user_ids,
        item_ids,
        interactions,
    }
}

/// Reads a `user<TAB>item<TAB>rating<TAB>timestamp` file. Duplicate
/// (user, item) rows are kept; the split deduplicates them.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<InteractionLog> {
    let rows = parse_rows(path.as_ref(), 0)?;
    Ok(densify(&rows))
}

/// Writes a log back out with its raw ids.
pub fn write_interactions(log: &InteractionLog, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in &log.interactions {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            log.user_ids[r.user], log.item_ids[r.item], r.rating, r.timestamp
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Split manifest: the interaction format plus `split` and `noise` columns.
/// `header` lines are written first as `#` comments.
pub fn write_manifest(ds: &InteractionDataset, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for h in header {
        writeln!(w, "# {h}")?;
    }
    let parts: [(Split, &[Interaction], Option<&[bool]>); 3] = [
        (Split::Train, ds.train(), Some(ds.train_noise())),
        (Split::Valid, ds.valid(), Some(ds.valid_noise())),
        (Split::Test, ds.test(), None),
    ];
    for (split, rows, flags) in parts {
        for (k, r) in rows.iter().enumerate() {
            let noisy = flags.is_some_and(|f| f[k]);
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                ds.user_ids[r.user],
                ds.item_ids[r.item],
                r.rating,
                r.timestamp,
                split.as_str(),
                u8::from(noisy)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a manifest produced by [`write_manifest`]. Sub-threshold ratings that
/// were dropped before writing are not recoverable, so the result cannot be
/// re-noised naturally.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<InteractionDataset> {
    let path = path.as_ref();
    let rows = parse_rows(path, 2)?;
    let log = densify(&rows);
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let (mut train_noise, mut valid_noise) = (Vec::new(), Vec::new());
    for (idx, (row, it)) in rows.iter().zip(&log.interactions).enumerate() {
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let split = Split::parse(&row.extra[0]).ok_or_else(|| bad(format!("invalid split `{}`", row.extra[0])))?;
        let noise = match row.extra[1].as_str() {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("invalid noise flag `{other}`"))),
        };
        match split {
            Split::Train => {
                train.push(*it);
                train_noise.push(noise);
            }
            Split::Valid => {
                valid.push(*it);
                valid_noise.push(noise);
            }
            Split::Test => {
                if noise {
                    return Err(bad("test rows cannot be noise".into()));
                }
                test.push(*it);
            }
        }
    }
    let max_ts = |rows: &[Interaction], default: i64| rows.iter().map(|r| r.timestamp).max().unwrap_or(default);
    let start = log.interactions.iter().map(|r| r.timestamp).min().unwrap_or(0);
    let train_end = max_ts(&train, start);
    let valid_end = max_ts(&valid, train_end);
    let end = max_ts(&log.interactions, valid_end);
    let observed: HashSet<(usize, usize)> = log.interactions.iter().map(|r| (r.user, r.item)).collect();
    Ok(InteractionDataset::assemble(
        log.num_users,
        log.num_items,
        log.user_ids,
        log.item_ids,
        train,
        valid,
        test,
        train_noise,
        valid_noise,
        SplitBoundaries {
            start,
            train_end,
            valid_end,
            end,
        },
        Vec::new(),
        observed,
    ))
}

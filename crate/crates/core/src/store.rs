//! Game files, rating snapshots and initial priors.
//!
//! Game files are comma-separated `period,white,black,result` rows; the
//! header line is optional and `result` is one of `1`, `0.5`, `0`, `W`, `D`,
//! `L` (white's perspective). Blank lines and lines starting with `#` are
//! skipped. Parsing never stops at a bad row: it is returned as a reject with
//! its line number.
//!
//! Snapshots are tab-separated text:
//!
//! ```text
//! drawrate-snapshot	1
//! period	5
//! hyperparameters	0	0	1.09861	0.17037	0.14391
//! config	0.691	true	1800	250	100
//! player	alice	1.727	0.5756	12
//! ```
//!
//! Numbers are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::{GameRecord, PlayerId};
use crate::model::{Hyperparameters, Outcome};
use crate::update::{Belief, EngineConfig, PlayerState, RatingState};

pub const SNAPSHOT_MAGIC: &str = "drawrate-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const GAME_HEADER: [&str; 4] = ["period", "white", "black", "result"];

/// A row that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReject {
    pub line: usize,
    pub reason: String,
}

pub fn parse_outcome(field: &str) -> Option<Outcome> {
    match field.trim() {
        "1" | "1.0" | "W" | "w" => Some(Outcome::Win),
        "0.5" | ".5" | "1/2" | "D" | "d" => Some(Outcome::Draw),
        "0" | "0.0" | "L" | "l" => Some(Outcome::Loss),
        _ => None,
    }
}

fn outcome_code(o: Outcome) -> &'static str {
    match o {
        Outcome::Win => "1",
        Outcome::Draw => "0.5",
        Outcome::Loss => "0",
    }
}

fn valid_id(id: &str) -> Result<PlayerId, String> {
    if id.is_empty() {
        return Err("empty player id".into());
    }
    if id.chars().any(|c| c.is_control()) {
        return Err(format!("player id {id:?} contains control characters"));
    }
    Ok(PlayerId::new(id))
}

type Row = std::result::Result<(usize, Vec<String>), RowReject>;

/// Reads comma-separated rows, skipping blanks, `#` comments and an
/// optional header matching `header`. Returns `(line, fields)` per row,
/// or a reject for undecodable rows.
fn read_rows<R: Read>(mut reader: R, header: &[&str]) -> Result<Vec<Row>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut rows = Vec::new();
    let mut first = true;
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let trimmed = raw.trim_ascii_start();
        if trimmed.is_empty() || trimmed[0] == b'#' {
            continue;
        }
        let mut csv = csv::ReaderBuilder::new().has_headers(false).from_reader(raw);
        let mut record = csv::ByteRecord::new();
        let fields = match csv.read_byte_record(&mut record) {
            Ok(_) => record
                .iter()
                .map(|f| std::str::from_utf8(f).map(|s| s.trim().to_owned()).map_err(|_| "invalid UTF-8".to_owned()))
                .collect::<std::result::Result<Vec<_>, _>>(),
            Err(e) => Err(e.to_string()),
        };
        let fields = match fields {
            Ok(f) => f,
            Err(reason) => {
                rows.push(Err(RowReject { line, reason }));
                first = false;
                continue;
            }
        };
        if first && fields.len() == header.len() && fields.iter().zip(header).all(|(f, h)| f.eq_ignore_ascii_case(h)) {
            first = false;
            continue;
        }
        first = false;
        rows.push(Ok((line, fields)));
    }
    Ok(rows)
}

/// Parses a game file into records and per-line rejects.
pub fn parse_games<R: Read>(reader: R) -> Result<(Vec<GameRecord>, Vec<RowReject>)> {
    let mut games = Vec::new();
    let mut rejects = Vec::new();
    for row in read_rows(reader, &GAME_HEADER)? {
        let (line, fields) = match row {
            Ok(r) => r,
            Err(rej) => {
                rejects.push(rej);
                continue;
            }
        };
        match parse_game_fields(&fields) {
            Ok(g) => games.push(g),
            Err(reason) => rejects.push(RowReject { line, reason }),
        }
    }
    Ok((games, rejects))
}

fn parse_game_fields(fields: &[String]) -> std::result::Result<GameRecord, String> {
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let period: u32 = fields[0].parse().map_err(|_| format!("bad period {:?}", fields[0]))?;
    if period == 0 {
        return Err("period must be >= 1".into());
    }
    let white = valid_id(&fields[1])?;
    let black = valid_id(&fields[2])?;
    if white == black {
        return Err(format!("self-play by {white}"));
    }
    let result = parse_outcome(&fields[3]).ok_or_else(|| format!("unknown result {:?}", fields[3]))?;
    Ok(GameRecord { period, white, black, result })
}

/// Writes games in the same format `parse_games` reads.
pub fn write_games<W: Write>(w: W, games: &[GameRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("{other:?}")),
    };
    out.write_record(GAME_HEADER).map_err(csv_err)?;
    for g in games {
        let period = g.period.to_string();
        out.write_record([period.as_str(), g.white.as_str(), g.black.as_str(), outcome_code(g.result)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// A white/black pairing to predict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub white: PlayerId,
    pub black: PlayerId,
}

/// Parses `white,black` rows (optional header).
pub fn parse_fixtures<R: Read>(reader: R) -> Result<(Vec<Fixture>, Vec<RowReject>)> {
    let mut out = Vec::new();
    let mut rejects = Vec::new();
    for row in read_rows(reader, &["white", "black"])? {
        let (line, fields) = match row {
            Ok(r) => r,
            Err(rej) => {
                rejects.push(rej);
                continue;
            }
        };
        let parsed = (|| {
            if fields.len() != 2 {
                return Err(format!("expected 2 fields, found {}", fields.len()));
            }
            let white = valid_id(&fields[0])?;
            let black = valid_id(&fields[1])?;
            if white == black {
                return Err(format!("self-pairing of {white}"));
            }
            Ok(Fixture { white, black })
        })();
        match parsed {
            Ok(f) => out.push(f),
            Err(reason) => rejects.push(RowReject { line, reason }),
        }
    }
    Ok((out, rejects))
}

/// Parses `player,elo` rows (optional header).
pub fn parse_ratings<R: Read>(reader: R) -> Result<(Vec<(PlayerId, f64)>, Vec<RowReject>)> {
    let mut out = Vec::new();
    let mut rejects = Vec::new();
    for row in read_rows(reader, &["player", "elo"])? {
        let (line, fields) = match row {
            Ok(r) => r,
            Err(rej) => {
                rejects.push(rej);
                continue;
            }
        };
        let parsed = (|| {
            if fields.len() != 2 {
                return Err(format!("expected 2 fields, found {}", fields.len()));
            }
            let id = valid_id(&fields[0])?;
            let elo: f64 = fields[1].parse().map_err(|_| format!("bad rating {:?}", fields[1]))?;
            if !elo.is_finite() {
                return Err(format!("non-finite rating {elo}"));
            }
            Ok((id, elo))
        })();
        match parsed {
            Ok(r) => out.push(r),
            Err(reason) => rejects.push(RowReject { line, reason }),
        }
    }
    Ok((out, rejects))
}

/// Seeds rated players at their converted rating with the configured rated
/// deviation. Unlisted players get the default prior when they first play.
pub fn initialize_priors(ratings: &[(PlayerId, f64)], period: u32, cfg: &EngineConfig) -> Result<RatingState> {
    let mut players = BTreeMap::new();
    for (id, elo) in ratings {
        let belief = cfg.rated_prior(*elo)?;
        if players.insert(id.clone(), PlayerState { belief, games_played: 0 }).is_some() {
            return Err(Error::invalid(format!("duplicate player id {id}")));
        }
    }
    Ok(RatingState { period, players })
}

/// Rating state plus the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingSnapshot {
    pub state: RatingState,
    pub hyperparameters: Hyperparameters,
    pub config: EngineConfig,
}

impl RatingSnapshot {
    pub fn to_text(&self) -> String {
        let h = &self.hyperparameters;
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{SNAPSHOT_MAGIC}\t{SNAPSHOT_VERSION}");
        let _ = writeln!(out, "period\t{}", self.state.period);
        let _ = writeln!(out, "hyperparameters\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}", h.alpha0, h.alpha1, h.beta0, h.beta1, h.tau);
        let _ = writeln!(
            out,
            "config\t{:?}\t{}\t{:?}\t{:?}\t{:?}",
            c.sigma_cap, c.draw_score_override, c.default_mean_elo, c.default_sd_elo, c.rated_sd_elo
        );
        for (id, p) in &self.state.players {
            let _ = writeln!(out, "player\t{id}\t{:?}\t{:?}\t{}", p.belief.mu, p.belief.sigma, p.games_played);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, reason: &str| Error::Snapshot { line, reason: reason.to_owned() };

        let (n, head) = lines.next().ok_or_else(|| bad(1, "empty snapshot"))?;
        let head: Vec<&str> = head.split('\t').collect();
        if head.first() != Some(&SNAPSHOT_MAGIC) || head.len() != 2 {
            return Err(bad(n, "missing snapshot header"));
        }
        if head[1] != SNAPSHOT_VERSION.to_string() {
            return Err(Error::SchemaVersion { found: head[1].to_owned(), expected: SNAPSHOT_VERSION });
        }

        let mut period = None;
        let mut hyper = None;
        let mut config = None;
        let mut players = BTreeMap::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number {s:?}")));
            match (f[0], f.len()) {
                ("period", 2) => period = Some(f[1].parse::<u32>().map_err(|_| bad(n, "bad period"))?),
                ("hyperparameters", 6) => {
                    let h = Hyperparameters {
                        alpha0: num(f[1])?,
                        alpha1: num(f[2])?,
                        beta0: num(f[3])?,
                        beta1: num(f[4])?,
                        tau: num(f[5])?,
                    };
                    h.validate().map_err(|e| bad(n, &e.to_string()))?;
                    hyper = Some(h);
                }
                ("config", 6) => {
                    let c = EngineConfig {
                        sigma_cap: num(f[1])?,
                        draw_score_override: f[2].parse().map_err(|_| bad(n, "bad flag"))?,
                        default_mean_elo: num(f[3])?,
                        default_sd_elo: num(f[4])?,
                        rated_sd_elo: num(f[5])?,
                    };
                    c.validate().map_err(|e| bad(n, &e.to_string()))?;
                    config = Some(c);
                }
                ("player", 5) => {
                    let id = valid_id(f[1]).map_err(|r| bad(n, &r))?;
                    let belief = Belief { mu: num(f[2])?, sigma: num(f[3])? };
                    belief.validate().map_err(|e| bad(n, &e.to_string()))?;
                    let games_played = f[4].parse().map_err(|_| bad(n, "bad game count"))?;
                    if players.insert(id, PlayerState { belief, games_played }).is_some() {
                        return Err(bad(n, "duplicate player"));
                    }
                }
                _ => return Err(bad(n, &format!("unrecognized line {line:?}"))),
            }
        }
        Ok(RatingSnapshot {
            state: RatingState { period: period.ok_or_else(|| bad(0, "missing period"))?, players },
            hyperparameters: hyper.ok_or_else(|| bad(0, "missing hyperparameters"))?,
            config: config.ok_or_else(|| bad(0, "missing config"))?,
        })
    }
}

pub fn save_snapshot<W: Write>(snapshot: &RatingSnapshot, mut w: W) -> Result<()> {
    w.write_all(snapshot.to_text().as_bytes())?;
    Ok(())
}

pub fn load_snapshot<R: BufRead>(mut r: R) -> Result<RatingSnapshot> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    RatingSnapshot::parse(&text)
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_snapshot_file(snapshot: &RatingSnapshot, path: &Path) -> Result<()> {
    write_atomic(path, snapshot.to_text().as_bytes())
}

pub fn load_snapshot_file(path: &Path) -> Result<RatingSnapshot> {
    RatingSnapshot::parse(&fs::read_to_string(path)?)
}

/// Distinct players appearing in `games`.
pub fn players_in(games: &[GameRecord]) -> BTreeSet<PlayerId> {
    games.iter().flat_map(|g| [g.white.clone(), g.black.clone()]).collect()
}

//! Quadratic assignment problem instances and objective evaluation.
//!
//! An instance of size `n` consists of two `n x n` non-negative integer
//! matrices: distances `A` between locations and flows `B` between
//! facilities. A candidate solution assigns facility `i` to location `s[i]`,
//! with objective
//!
//! ```text
//! f(s) = sum_{i,j} A[s[i]][s[j]] * B[i][j]
//! ```
//!
//! minimized over permutations `s`. Files follow the plain-text QAPLIB
//! layout: the size `n` followed by the `A` and then the `B` matrix in
//! row-major order, all whitespace-separated. Matrix entries are validated
//! at construction so that any objective value fits comfortably in `i64`;
//! evaluation itself then needs no checked arithmetic.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

/// Objective value of an assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fitness(pub i64);

impl fmt::Display for Fitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error)]
pub enum QapError {
    #[error("{name}: {detail}")]
    Malformed { name: String, detail: String },
    #[error("{name}: n^2 * max(A) * max(B) exceeds the 64-bit evaluation budget")]
    Overflow { name: String },
    #[error("permutation has size {got}, instance needs {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("cannot swap facilities {i} and {j} in a permutation of size {n}")]
    BadSwap { i: usize, j: usize, n: usize },
    #[error("not a permutation: {0}")]
    NotAPermutation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// An assignment of facilities to locations; entry `i` is the location of
/// facility `i`, so the vector is a permutation of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation(Vec<u16>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n as u16).collect())
    }

    /// Validates that `locations` is a bijection on `0..n`.
    pub fn new(locations: Vec<u16>) -> Result<Self, QapError> {
        let n = locations.len();
        let mut seen = vec![false; n];
        for &l in &locations {
            if (l as usize) < n && !seen[l as usize] {
                seen[l as usize] = true;
            } else {
                return Err(QapError::NotAPermutation(format!("{locations:?}")));
            }
        }
        Ok(Permutation(locations))
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut p: Vec<u16> = (0..n as u16).collect();
        p.shuffle(rng);
        Permutation(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn location_of(&self, facility: usize) -> usize {
        self.0[facility] as usize
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.0
    }

    /// Exchanges the locations of two facilities.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.0.swap(i, j);
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = QapError;

    fn from_str(s: &str) -> Result<Self, QapError> {
        let locs = s
            .split_whitespace()
            .map(|t| t.parse::<u16>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| QapError::NotAPermutation(s.to_string()))?;
        Permutation::new(locs)
    }
}

/// A parsed and validated instance.
#[derive(Clone, Debug)]
pub struct QapInstance {
    name: String,
    n: usize,
    a: Vec<i64>,
    b: Vec<i64>,
}

impl QapInstance {
    pub fn new(name: &str, n: usize, a: Vec<i64>, b: Vec<i64>) -> Result<Self, QapError> {
        let malformed = |detail: String| QapError::Malformed {
            name: name.to_string(),
            detail,
        };
        if n == 0 {
            return Err(malformed("size must be at least 1".into()));
        }
        if n > u16::MAX as usize {
            return Err(malformed(format!("size {n} exceeds the supported maximum")));
        }
        if a.len() != n * n || b.len() != n * n {
            return Err(malformed(format!(
                "expected two {n}x{n} matrices, got {} and {} entries",
                a.len(),
                b.len()
            )));
        }
        if let Some(v) = a.iter().chain(b.iter()).find(|&&v| v < 0) {
            return Err(malformed(format!("negative matrix entry {v}")));
        }
        let max_a = a.iter().copied().max().unwrap_or(0) as i128;
        let max_b = b.iter().copied().max().unwrap_or(0) as i128;
        if (n as i128) * (n as i128) * max_a * max_b > i64::MAX as i128 / 4 {
            return Err(QapError::Overflow {
                name: name.to_string(),
            });
        }
        Ok(QapInstance {
            name: name.to_string(),
            n,
            a,
            b,
        })
    }

    /// Parses the plain-text QAPLIB layout: `n`, then `A`, then `B`,
    /// whitespace-separated. Exactly `1 + 2n^2` integer tokens are required.
    pub fn parse(text: &str, name: &str) -> Result<Self, QapError> {
        let malformed = |detail: String| QapError::Malformed {
            name: name.to_string(),
            detail,
        };
        let mut values = Vec::new();
        for tok in text.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| malformed(format!("invalid integer token `{tok}`")))?;
            values.push(v);
        }
        let Some((&head, rest)) = values.split_first() else {
            return Err(malformed("empty instance".into()));
        };
        if head < 1 {
            return Err(malformed(format!("size must be at least 1, got {head}")));
        }
        let n = head as usize;
        let expected = 2 * n * n;
        if rest.len() != expected {
            return Err(malformed(format!(
                "expected {expected} matrix entries for n={n}, found {}",
                rest.len()
            )));
        }
        let (a, b) = rest.split_at(n * n);
        QapInstance::new(name, n, a.to_vec(), b.to_vec())
    }

    /// Reads an instance file; the name is the file stem.
    pub fn from_file(path: &Path) -> Result<Self, QapError> {
        let text = fs::read_to_string(path).map_err(|source| QapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        QapInstance::parse(&text, &name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> i64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> i64 {
        self.b[i * self.n + j]
    }

    /// Serializes back to the file layout accepted by [`QapInstance::parse`].
    pub fn to_qaplib_string(&self) -> String {
        let mut out = format!("{}\n\n", self.n);
        for (k, m) in [&self.a, &self.b].into_iter().enumerate() {
            for row in m.chunks(self.n) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            if k == 0 {
                out.push('\n');
            }
        }
        out
    }

    pub fn evaluate(&self, s: &Permutation) -> Result<Fitness, QapError> {
        if s.len() != self.n {
            return Err(QapError::SizeMismatch {
                expected: self.n,
                got: s.len(),
            });
        }
        let mut f = 0i64;
        for i in 0..self.n {
            let li = s.location_of(i);
            for j in 0..self.n {
                f += self.a(li, s.location_of(j)) * self.b(i, j);
            }
        }
        Ok(Fitness(f))
    }

    /// Objective after exchanging the locations of facilities `i` and `j`,
    /// computed in O(n) from the objective `current` of `s`. `s` is the
    /// solution before the swap.
    pub fn delta(
        &self,
        s: &Permutation,
        current: Fitness,
        i: usize,
        j: usize,
    ) -> Result<Fitness, QapError> {
        if s.len() != self.n {
            return Err(QapError::SizeMismatch {
                expected: self.n,
                got: s.len(),
            });
        }
        if i == j || i >= self.n || j >= self.n {
            return Err(QapError::BadSwap { i, j, n: self.n });
        }
        let li = s.location_of(i);
        let lj = s.location_of(j);
        let mut d = (self.a(lj, lj) - self.a(li, li)) * (self.b(i, i) - self.b(j, j))
            + (self.a(lj, li) - self.a(li, lj)) * (self.b(i, j) - self.b(j, i));
        for q in 0..self.n {
            if q == i || q == j {
                continue;
            }
            let lq = s.location_of(q);
            d += (self.a(lj, lq) - self.a(li, lq)) * (self.b(i, q) - self.b(j, q))
                + (self.a(lq, lj) - self.a(lq, li)) * (self.b(q, i) - self.b(q, j));
        }
        Ok(Fitness(current.0 + d))
    }
}

/// Loads a best-known-values sidecar: one `name value` pair per line, blank
/// lines and `#` comments ignored.
pub fn load_best_known(path: &Path) -> Result<BTreeMap<String, Fitness>, QapError> {
    let text = fs::read_to_string(path).map_err(|source| QapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let malformed = |detail: String| QapError::Malformed {
        name: path.display().to_string(),
        detail,
    };
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed(format!("expected `name value`, got `{line}`")));
        };
        let value: i64 = value
            .parse()
            .map_err(|_| malformed(format!("invalid value in `{line}`")))?;
        if out.insert(name.to_string(), Fitness(value)).is_some() {
            return Err(malformed(format!("duplicate entry for `{name}`")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "2\n0 1\n1 0\n\n0 2\n2 0\n";

    #[test]
    fn parses_and_evaluates_two_facility_instance() {
        let inst = QapInstance::parse(TWO, "two").unwrap();
        assert_eq!(inst.size(), 2);
        let id = Permutation::identity(2);
        let swapped = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(inst.evaluate(&id).unwrap(), Fitness(4));
        assert_eq!(inst.evaluate(&swapped).unwrap(), Fitness(4));
    }

    #[test]
    fn asymmetric_hand_example() {
        // f(identity) and f(swap 0,1) computed by hand.
        let a = vec![0, 1, 2, 3, 0, 4, 5, 6, 0];
        let b = vec![0, 2, 0, 1, 0, 3, 0, 2, 0];
        let inst = QapInstance::new("tiny", 3, a, b).unwrap();
        let id = Permutation::identity(3);
        assert_eq!(inst.evaluate(&id).unwrap(), Fitness(29));
        let f = inst.delta(&id, Fitness(29), 0, 1).unwrap();
        assert_eq!(f, Fitness(23));
        let mut s = id.clone();
        s.swap(0, 1);
        assert_eq!(inst.evaluate(&s).unwrap(), f);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            QapInstance::parse("", "x"),
            Err(QapError::Malformed { .. })
        ));
        assert!(matches!(
            QapInstance::parse("2 0 1 1 0 0 2 2", "x"),
            Err(QapError::Malformed { .. })
        ));
        assert!(matches!(
            QapInstance::parse("2 0 1 1 0 0 2 2 zero", "x"),
            Err(QapError::Malformed { .. })
        ));
        assert!(matches!(
            QapInstance::parse("0", "x"),
            Err(QapError::Malformed { .. })
        ));
        assert!(matches!(
            QapInstance::parse("1 -3 5", "x"),
            Err(QapError::Malformed { .. })
        ));
    }

    #[test]
    fn rejects_overflow_risk() {
        let big = i64::MAX / 16;
        let inst = QapInstance::new("big", 2, vec![big; 4], vec![big; 4]);
        assert!(matches!(inst, Err(QapError::Overflow { .. })));
    }

    #[test]
    fn round_trips_through_qaplib_layout() {
        let inst = QapInstance::parse(TWO, "two").unwrap();
        let again = QapInstance::parse(&inst.to_qaplib_string(), "two").unwrap();
        assert_eq!(inst.a, again.a);
        assert_eq!(inst.b, again.b);
        assert_eq!(inst.n, again.n);
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 1, 2]).is_ok());
        assert!(Permutation::new(vec![0, 0, 2]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let p: Permutation = "2 0 1".parse().unwrap();
        assert_eq!(p.to_string(), "2 0 1");
        assert!("2 0 hi".parse::<Permutation>().is_err());
    }

    #[test]
    fn best_known_sidecar() {
        let dir = std::env::temp_dir().join("lonflow-qap-bks-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("values.txt");
        std::fs::write(&path, "# comment\nnug12 578\n\ntai20a 703482\n").unwrap();
        let map = load_best_known(&path).unwrap();
        assert_eq!(map["nug12"], Fitness(578));
        assert_eq!(map["tai20a"], Fitness(703482));
        std::fs::write(&path, "nug12 578\nnug12 578\n").unwrap();
        assert!(load_best_known(&path).is_err());
    }
}

//! Survival data in counting-process form, validation, sharding and CSV I/O.
//!
//! Every dataset is stored as `(start, stop]` rows. Time-independent data is the
//! degenerate case `start = 0`, so a single code path serves both kinds. Rows are
//! kept sorted by stop time descending (events before censorings at equal times)
//! which is the order the partial-likelihood sweep consumes them in.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoxError, Result};
use crate::scalar::Real;

/// One `(start, stop]` interval of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord<T> {
    pub subject_id: u64,
    pub start: T,
    pub stop: T,
    pub event: bool,
    /// Covariate values on `(start, stop]`.
    pub covariates: Vec<T>,
}

impl<T: Real> SurvivalRecord<T> {
    /// A time-independent observation, i.e. a single row starting at 0.
    pub fn new(subject_id: u64, stop: T, event: bool, covariates: Vec<T>) -> Self {
        Self { subject_id, start: T::zero(), stop, event, covariates }
    }

    pub fn interval(subject_id: u64, start: T, stop: T, event: bool, covariates: Vec<T>) -> Self {
        Self { subject_id, start, stop, event, covariates }
    }
}

/// Validated, columnar survival data sorted by descending stop time.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset<T> {
    p: usize,
    ids: Vec<u64>,
    start: Vec<T>,
    stop: Vec<T>,
    event: Vec<bool>,
    /// Row-major `n_rows x p`.
    z: Vec<T>,
    /// Distinct subject ids, ascending.
    subjects: Vec<u64>,
    /// Dense index into `subjects` for every row.
    subject_index: Vec<u32>,
    d0: usize,
    /// Rows ordered by start time descending; `None` when every start is 0.
    start_order: Option<Vec<u32>>,
}

fn row_order<T: Real>(a: (T, bool, u64, T), b: (T, bool, u64, T)) -> Ordering {
    // stop descending, events first, then id and start ascending for a canonical order
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.1.cmp(&a.1))
        .then_with(|| a.2.cmp(&b.2))
        .then_with(|| a.3.partial_cmp(&b.3).unwrap_or(Ordering::Equal))
}

/// Checks the records and builds a sorted dataset.
pub fn validate_dataset<T: Real>(records: Vec<SurvivalRecord<T>>) -> Result<SurvivalDataset<T>> {
    let first = records
        .first()
        .ok_or_else(|| CoxError::InvalidData("no records".into()))?;
    let p = first.covariates.len();
    if p == 0 {
        return Err(CoxError::InvalidData("covariate dimension must be at least 1".into()));
    }

    let mut by_subject: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.covariates.len() != p {
            return Err(CoxError::InvalidData(format!(
                "dimension mismatch: row {i} has {} covariates, expected {p}",
                r.covariates.len()
            )));
        }
        if !r.start.is_finite_value()
            || !r.stop.is_finite_value()
            || r.covariates.iter().any(|z| !z.is_finite_value())
        {
            return Err(CoxError::InvalidData(format!("row {i} has a non-finite value")));
        }
        if r.start < T::zero() {
            return Err(CoxError::InvalidData(format!("row {i} has negative start time")));
        }
        if r.start >= r.stop {
            return Err(CoxError::InvalidData(format!(
                "row {i} (subject {}): start >= stop",
                r.subject_id
            )));
        }
        by_subject.entry(r.subject_id).or_default().push(i);
    }

    for (id, rows) in by_subject.iter_mut() {
        rows.sort_by(|&a, &b| {
            records[a].start.partial_cmp(&records[b].start).unwrap_or(Ordering::Equal)
        });
        for w in rows.windows(2) {
            let (prev, next) = (&records[w[0]], &records[w[1]]);
            if next.start < prev.stop {
                return Err(CoxError::InvalidData(format!(
                    "overlapping intervals for subject {id}"
                )));
            }
            if next.start > prev.stop {
                return Err(CoxError::InvalidData(format!(
                    "non-contiguous intervals for subject {id}"
                )));
            }
            if prev.event {
                return Err(CoxError::InvalidData(format!(
                    "event on non-final interval for subject {id}"
                )));
            }
        }
    }
    if by_subject.len() < 2 {
        return Err(CoxError::InvalidData("at least two subjects are required".into()));
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        row_order((ra.stop, ra.event, ra.subject_id, ra.start), (rb.stop, rb.event, rb.subject_id, rb.start))
    });

    let subjects: Vec<u64> = by_subject.keys().copied().collect();
    let n = records.len();
    let mut ids = Vec::with_capacity(n);
    let mut start = Vec::with_capacity(n);
    let mut stop = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n * p);
    for &i in &order {
        let r = &records[i];
        ids.push(r.subject_id);
        start.push(r.start);
        stop.push(r.stop);
        event.push(r.event);
        z.extend_from_slice(&r.covariates);
    }
    let subject_index = ids
        .iter()
        .map(|id| subjects.binary_search(id).expect("subject listed") as u32)
        .collect();
    Ok(SurvivalDataset::assemble(p, ids, start, stop, event, z, subjects, subject_index))
}

impl<T: Real> SurvivalDataset<T> {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        p: usize,
        ids: Vec<u64>,
        start: Vec<T>,
        stop: Vec<T>,
        event: Vec<bool>,
        z: Vec<T>,
        subjects: Vec<u64>,
        subject_index: Vec<u32>,
    ) -> Self {
        let d0 = event.iter().filter(|&&e| e).count();
        let start_order = if start.iter().any(|&s| s > T::zero()) {
            let mut o: Vec<u32> = (0..start.len() as u32).collect();
            o.sort_by(|&a, &b| {
                start[b as usize]
                    .partial_cmp(&start[a as usize])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            Some(o)
        } else {
            None
        };
        Self { p, ids, start, stop, event, z, subjects, subject_index, d0, start_order }
    }

    /// Builds a dataset from a subset of rows that are already in storage order.
    fn from_sorted_rows(&self, rows: &[usize]) -> Self {
        let p = self.p;
        let ids: Vec<u64> = rows.iter().map(|&r| self.ids[r]).collect();
        let mut subjects = ids.clone();
        subjects.sort_unstable();
        subjects.dedup();
        let subject_index =
            ids.iter().map(|id| subjects.binary_search(id).expect("present") as u32).collect();
        let mut z = Vec::with_capacity(rows.len() * p);
        for &r in rows {
            z.extend_from_slice(self.row(r));
        }
        Self::assemble(
            p,
            ids,
            rows.iter().map(|&r| self.start[r]).collect(),
            rows.iter().map(|&r| self.stop[r]).collect(),
            rows.iter().map(|&r| self.event[r]).collect(),
            z,
            subjects,
            subject_index,
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_rows(&self) -> usize {
        self.stop.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Number of observed events.
    pub fn d0(&self) -> usize {
        self.d0
    }

    pub fn subjects(&self) -> &[u64] {
        &self.subjects
    }

    pub fn subject_ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn start(&self) -> &[T] {
        &self.start
    }

    pub fn stop(&self) -> &[T] {
        &self.stop
    }

    pub fn event(&self) -> &[bool] {
        &self.event
    }

    /// Covariates of row `i` in storage order.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    pub fn covariates(&self) -> &[T] {
        &self.z
    }

    /// True when some row starts after time 0 (time-dependent covariates).
    pub fn is_counting_process(&self) -> bool {
        self.start_order.is_some()
    }

    pub(crate) fn start_order(&self) -> Option<&[u32]> {
        self.start_order.as_deref()
    }

    /// Rows back as records, in storage order.
    pub fn to_records(&self) -> Vec<SurvivalRecord<T>> {
        (0..self.n_rows())
            .map(|i| SurvivalRecord {
                subject_id: self.ids[i],
                start: self.start[i],
                stop: self.stop[i],
                event: self.event[i],
                covariates: self.row(i).to_vec(),
            })
            .collect()
    }

    /// The `k`-th subset of a shard plan, with its own sorted order.
    pub fn shard(&self, plan: &ShardPlan, k: usize) -> Result<Self> {
        plan.check_compatible(self)?;
        if k >= plan.k_shards {
            return Err(CoxError::InvalidArgument(format!(
                "shard index {k} out of range for {} shards",
                plan.k_shards
            )));
        }
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&r| plan.shard_of[self.subject_index[r] as usize] == k)
            .collect();
        Ok(self.from_sorted_rows(&rows))
    }

    /// All subsets of a shard plan, in shard order.
    pub fn split(&self, plan: &ShardPlan) -> Result<Vec<Self>> {
        plan.check_compatible(self)?;
        let mut rows = vec![Vec::new(); plan.k_shards];
        for r in 0..self.n_rows() {
            rows[plan.shard_of[self.subject_index[r] as usize]].push(r);
        }
        Ok(rows.iter().map(|rs| self.from_sorted_rows(rs)).collect())
    }

    /// Same data in another scalar type.
    pub fn cast<U: Real>(&self) -> SurvivalDataset<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::lit(x.as_f64())).collect::<Vec<U>>();
        SurvivalDataset::<U>::assemble(
            self.p,
            self.ids.clone(),
            conv(&self.start),
            conv(&self.stop),
            self.event.clone(),
            conv(&self.z),
            self.subjects.clone(),
            self.subject_index.clone(),
        )
    }
}

/// Partition of subjects into `K` disjoint subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardPlan {
    pub k_shards: usize,
    /// Subject ids, ascending; `shard_of[i]` is the shard of `subject_ids[i]`.
    pub subject_ids: Vec<u64>,
    pub shard_of: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl ShardPlan {
    pub fn shard_for(&self, subject_id: u64) -> Option<usize> {
        self.subject_ids.binary_search(&subject_id).ok().map(|i| self.shard_of[i])
    }

    fn check_compatible<T>(&self, data: &SurvivalDataset<T>) -> Result<()> {
        if self.subject_ids != data.subjects {
            return Err(CoxError::InvalidArgument(
                "shard plan was built for a different dataset".into(),
            ));
        }
        Ok(())
    }
}

/// Random balanced partition of the subjects, reproducible from `seed`.
///
/// Shard sizes differ by at most one; the first `n mod K` shards receive the
/// extra subject.
pub fn make_shard_plan<T: Real>(
    dataset: &SurvivalDataset<T>,
    k_shards: usize,
    seed: u64,
) -> Result<ShardPlan> {
    let n = dataset.n_subjects();
    if k_shards == 0 || k_shards > n {
        return Err(CoxError::InvalidArgument(format!(
            "k_shards must be in [1, {n}], got {k_shards}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / k_shards;
    let extra = n % k_shards;
    let sizes: Vec<usize> = (0..k_shards).map(|k| base + usize::from(k < extra)).collect();
    let mut shard_of = vec![0; n];
    let mut pos = 0;
    for (k, &size) in sizes.iter().enumerate() {
        for &subject in &perm[pos..pos + size] {
            shard_of[subject] = k;
        }
        pos += size;
    }
    Ok(ShardPlan { k_shards, subject_ids: dataset.subjects.clone(), shard_of, sizes })
}

/// Reads the CSV schema `id,[start,]stop,event,z1,...,zp`.
pub fn read_csv<T: Real, R: Read>(reader: R) -> Result<SurvivalDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_start = names.get(1) == Some(&"start");
    let expect: &[&str] = if has_start { &["id", "start", "stop", "event"] } else { &["id", "stop", "event"] };
    if names.len() <= expect.len() || names[..expect.len()] != *expect {
        return Err(CoxError::InvalidData(format!(
            "header must be id,[start,]stop,event,z1,...,zp; got {}",
            names.join(",")
        )));
    }
    let off = expect.len();

    let mut records = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                CoxError::InvalidData(format!("row {}: cannot parse '{}'", line + 1, field(i)))
            })
        };
        let subject_id = field(0).parse::<u64>().map_err(|_| {
            CoxError::InvalidData(format!("row {}: bad id '{}'", line + 1, field(0)))
        })?;
        let start = if has_start { num(1)? } else { 0.0 };
        let stop = num(off - 2)?;
        let event = match field(off - 1) {
            "0" => false,
            "1" => true,
            other => {
                return Err(CoxError::InvalidData(format!(
                    "row {}: event must be 0 or 1, got '{other}'",
                    line + 1
                )))
            }
        };
        let covariates = (off..rec.len()).map(|i| num(i).map(T::lit)).collect::<Result<Vec<T>>>()?;
        records.push(SurvivalRecord::interval(subject_id, T::lit(start), T::lit(stop), event, covariates));
    }
    validate_dataset(records)
}

pub fn read_csv_path<T: Real>(path: impl AsRef<Path>) -> Result<SurvivalDataset<T>> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes rows ordered by subject then start. The `start` column is emitted only
/// for counting-process data.
pub fn write_csv<T: Real, W: Write>(dataset: &SurvivalDataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_start = dataset.is_counting_process();
    let mut header = vec!["id".to_string()];
    if with_start {
        header.push("start".into());
    }
    header.extend(["stop".to_string(), "event".to_string()]);
    header.extend((1..=dataset.p()).map(|j| format!("z{j}")));
    w.write_record(&header)?;

    let mut rows: Vec<usize> = (0..dataset.n_rows()).collect();
    rows.sort_by(|&a, &b| {
        dataset.ids[a]
            .cmp(&dataset.ids[b])
            .then(dataset.start[a].partial_cmp(&dataset.start[b]).unwrap_or(Ordering::Equal))
    });
    let mut fields = Vec::with_capacity(header.len());
    for r in rows {
        fields.clear();
        fields.push(dataset.ids[r].to_string());
        if with_start {
            fields.push(dataset.start[r].as_f64().to_string());
        }
        fields.push(dataset.stop[r].as_f64().to_string());
        fields.push(if dataset.event[r] { "1" } else { "0" }.to_string());
        fields.extend(dataset.row(r).iter().map(|z| z.as_f64().to_string()));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_path<T: Real>(dataset: &SurvivalDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

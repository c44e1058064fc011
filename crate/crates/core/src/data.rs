//! Spatial datasets, distances and CSV ingestion.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point in projected planar coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Observed responses and covariates at a set of distinct sites.
///
/// `mu` carries the intercept as column 0; `error_mask[j]` marks columns
/// observed with measurement error.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialDataset {
    locations: Vec<Location>,
    y: DVector<f64>,
    mu: DMatrix<f64>,
    error_mask: Vec<bool>,
    covariate_names: Vec<String>,
}

impl SpatialDataset {
    /// Build a dataset from covariates *without* the intercept column; the
    /// column of ones is prepended here.
    pub fn from_covariates(
        locations: Vec<Location>,
        y: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
        error_prone: &[bool],
    ) -> Result<Self> {
        let n = locations.len();
        if covariates.nrows() != n {
            return Err(Error::InvalidData(format!(
                "{} covariate rows for {} locations",
                covariates.nrows(),
                n
            )));
        }
        let k = covariates.ncols();
        if covariate_names.len() != k || error_prone.len() != k {
            return Err(Error::InvalidData(
                "covariate names / error mask do not match covariate columns".into(),
            ));
        }
        let mu = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] });
        let mut mask = vec![false];
        mask.extend_from_slice(error_prone);
        let mut names = vec!["intercept".to_string()];
        names.extend(covariate_names);
        Self::new(locations, DVector::from_vec(y), mu, mask, names)
    }

    /// Build from a full design matrix whose column 0 is the intercept.
    pub fn new(
        locations: Vec<Location>,
        y: DVector<f64>,
        mu: DMatrix<f64>,
        error_mask: Vec<bool>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = locations.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 sites, got {n}")));
        }
        if y.len() != n || mu.nrows() != n {
            return Err(Error::InvalidData(format!(
                "length mismatch: {} locations, {} responses, {} covariate rows",
                n,
                y.len(),
                mu.nrows()
            )));
        }
        let p = mu.ncols();
        if p == 0 || error_mask.len() != p || names.len() != p {
            return Err(Error::InvalidData("design matrix shape does not match mask".into()));
        }
        if (0..n).any(|i| mu[(i, 0)] != 1.0) {
            return Err(Error::InvalidData("column 0 must be the intercept".into()));
        }
        if error_mask[0] {
            return Err(Error::InvalidData("the intercept cannot carry measurement error".into()));
        }
        if locations.iter().any(|l| !l.x.is_finite() || !l.y.is_finite())
            || y.iter().chain(mu.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::InvalidData("non-finite value".into()));
        }
        check_distinct(&locations)?;
        Ok(Self {
            locations,
            y,
            mu,
            error_mask,
            covariate_names: names,
        })
    }

    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn p(&self) -> usize {
        self.mu.ncols()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn mu(&self) -> &DMatrix<f64> {
        &self.mu
    }

    pub fn error_mask(&self) -> &[bool] {
        &self.error_mask
    }

    /// Column names including `intercept`.
    pub fn names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn has_error_prone(&self) -> bool {
        self.error_mask.iter().any(|&m| m)
    }

    /// Same sites and covariates with a different response vector.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::InvalidData("response length mismatch".into()));
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    /// Same data with every covariate treated as error free.
    pub fn without_error_mask(&self) -> Self {
        let mut out = self.clone();
        out.error_mask.iter_mut().for_each(|m| *m = false);
        out
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let locations = rows.iter().map(|&i| self.locations[i]).collect();
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let mu = DMatrix::from_fn(rows.len(), self.p(), |r, j| self.mu[(rows[r], j)]);
        Self::new(locations, y, mu, self.error_mask.clone(), self.covariate_names.clone())
    }
}

fn check_distinct(locations: &[Location]) -> Result<()> {
    for i in 0..locations.len() {
        for j in i + 1..locations.len() {
            if locations[i].distance(&locations[j]) <= 0.0 {
                return Err(Error::DuplicateLocation { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// Symmetric Euclidean distance matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix(DMatrix<f64>);

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Euclidean distances between all pairs of sites. The upper triangle is
/// computed and mirrored, so symmetry is exact. Coincident sites are
/// rejected.
pub fn pairwise_distances(locations: &[Location]) -> Result<DistanceMatrix> {
    let n = locations.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let h = locations[i].distance(&locations[j]);
            if h <= 0.0 {
                return Err(Error::DuplicateLocation { first: i, second: j });
            }
            d[(i, j)] = h;
            d[(j, i)] = h;
        }
    }
    Ok(DistanceMatrix(d))
}

/// Median of the `n(n−1)/2` distinct pairwise distances; an even count
/// takes the midpoint of the two central values.
pub fn median_distance(d: &DistanceMatrix) -> Result<f64> {
    let n = d.n();
    if n < 2 {
        return Err(Error::InvalidData("median distance needs at least 2 sites".into()));
    }
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d.get(i, j))
        .collect();
    Ok(median_of(&mut v))
}

pub(crate) fn median_of(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Column names used to read a dataset from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub x: String,
    pub y: String,
    pub response: String,
    pub covariates: Vec<String>,
    /// Subset of `covariates` observed with measurement error.
    pub error_prone: Vec<String>,
}

impl Schema {
    pub fn new(x: &str, y: &str, response: &str, covariates: &[&str], error_prone: &[&str]) -> Self {
        Self {
            x: x.into(),
            y: y.into(),
            response: response.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            error_prone: error_prone.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Read a header-bearing CSV into a dataset. Row order is preserved and the
/// intercept column is prepended.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<SpatialDataset> {
    for e in &schema.error_prone {
        if !schema.covariates.contains(e) {
            return Err(Error::InvalidData(format!(
                "error-prone column `{e}` is not listed among the covariates"
            )));
        }
    }
    let table = read_numeric_csv(path)?;
    let col = |name: &str| table.column(name);
    let xs = col(&schema.x)?;
    let ys = col(&schema.y)?;
    let resp = col(&schema.response)?;
    if resp.len() < 2 {
        return Err(Error::InvalidData(format!(
            "{}: need at least 2 rows, found {}",
            path.display(),
            resp.len()
        )));
    }
    let covs = schema
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;
    let n = resp.len();
    let locations = xs.iter().zip(&ys).map(|(&x, &y)| Location::new(x, y)).collect();
    let cov = DMatrix::from_fn(n, covs.len(), |i, j| covs[j][i]);
    let mask: Vec<bool> = schema
        .covariates
        .iter()
        .map(|c| schema.error_prone.contains(c))
        .collect();
    SpatialDataset::from_covariates(locations, resp, cov, schema.covariates.clone(), &mask)
}

/// Write a dataset back out with the schema's column names (intercept
/// omitted). `load_dataset` on the result reproduces the input exactly.
pub fn write_dataset(path: &Path, data: &SpatialDataset, schema: &Schema) -> Result<()> {
    let mut header = vec![schema.x.clone(), schema.y.clone(), schema.response.clone()];
    header.extend(schema.covariates.iter().cloned());
    let rows = (0..data.n()).map(|i| {
        let l = data.locations()[i];
        let mut r = vec![l.x, l.y, data.y()[i]];
        r.extend((1..data.p()).map(|j| data.mu()[(i, j)]));
        r
    });
    write_numeric_csv(path, &header, rows)
}

/// A fully numeric CSV table held column-wise.
#[derive(Clone, Debug)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].clone())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Read a CSV whose every cell is a number. Parse failures report the
/// 1-based data row and column name.
pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            columns[j].push(v);
        }
    }
    Ok(NumericTable { header, columns })
}

/// Write rows of numbers under a header. Values use the shortest
/// representation that round-trips, so output is byte-stable.
pub fn write_numeric_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    for r in rows {
        let line: Vec<String> = r.as_ref().iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

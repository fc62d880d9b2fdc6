//! CSV feature files: header `view,id,f1,...,fM`, one image per row.
//!
//! `view` is 1-based. `id` is a non-negative integer, or empty on every row for
//! unlabelled data.

use std::path::Path;

use crate::error::{CamelError, Result};
use crate::features::{FeatureSet, Sample};

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    load(path.as_ref(), None)
}

/// Like [`load_features`] but requires exactly `views` views.
pub fn load_features_with_views(path: impl AsRef<Path>, views: usize) -> Result<FeatureSet> {
    load(path.as_ref(), Some(views))
}

fn load(path: &Path, expected_views: Option<usize>) -> Result<FeatureSet> {
    let parse_err = |line: u64, message: String| CamelError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CamelError::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 3 || &header[0] != "view" || &header[1] != "id" {
        return Err(parse_err(1, "header must be `view,id,f1,...,fM`".into()));
    }
    let dim = header.len() - 2;

    let mut samples = Vec::new();
    let mut max_view = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let view: usize = record[0]
            .parse()
            .ok()
            .filter(|&v: &usize| v >= 1)
            .ok_or_else(|| parse_err(line, format!("invalid view id '{}'", &record[0])))?;
        if let Some(v) = expected_views {
            if view > v {
                return Err(parse_err(line, format!("view {view} outside 1..={v}")));
            }
        }
        let identity = match &record[1] {
            "" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| parse_err(line, format!("invalid identity '{s}'")))?,
            ),
        };
        let feature = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(
                            line,
                            format!("feature f{} is not a finite number: '{s}'", j + 1),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        debug_assert_eq!(feature.len(), dim);
        max_view = max_view.max(view);
        samples.push(Sample::new(view - 1, identity, feature));
    }
    let views = expected_views.unwrap_or(max_view);
    FeatureSet::new(views, samples)
}

pub fn save_features(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CamelError::io(path, io),
        other => CamelError::invalid(format!("{other:?}")),
    })?;
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CamelError::io(path, io),
        other => CamelError::invalid(format!("{other:?}")),
    };
    let mut header = vec!["view".to_string(), "id".to_string()];
    header.extend((1..=fs.dim()).map(|j| format!("f{j}")));
    writer.write_record(&header).map_err(wrap)?;
    let ids = fs.identities();
    for i in 0..fs.len() {
        let mut row = Vec::with_capacity(fs.dim() + 2);
        row.push((fs.view_of(i) + 1).to_string());
        row.push(ids.map(|ids| ids[i].to_string()).unwrap_or_default());
        row.extend(fs.features().column(i).iter().map(|v| v.to_string()));
        writer.write_record(&row).map_err(wrap)?;
    }
    writer.flush().map_err(|e| CamelError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_rows() {
        let f = write("view,id,f1,f2\n1,7,0.5,1\n2,7,2,-3e-1\n");
        let fs = load_features(f.path()).unwrap();
        assert_eq!((fs.views(), fs.dim(), fs.len()), (2, 2, 2));
        assert_eq!(fs.identities(), Some(&[7u64, 7][..]));
        assert_eq!(fs.features()[(1, 1)], -0.3);
    }

    #[test]
    fn unlabelled() {
        let f = write("view,id,f1\n1,,0.5\n2,,1\n");
        let fs = load_features(f.path()).unwrap();
        assert!(!fs.is_labelled());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let ragged = write("view,id,f1,f2\n1,,0.5,1\n2,,1\n");
        let err = load_features(ragged.path()).unwrap_err();
        assert!(matches!(err, CamelError::Parse { line: 3, .. }), "{err}");

        let text = write("view,id,f1\n1,,0.5\n2,,abc\n");
        let err = load_features(text.path()).unwrap_err();
        assert!(matches!(err, CamelError::Parse { line: 3, .. }), "{err}");

        let view = write("view,id,f1\n0,,0.5\n2,,1\n");
        let err = load_features(view.path()).unwrap_err();
        assert!(matches!(err, CamelError::Parse { line: 2, .. }), "{err}");

        let outside = write("view,id,f1\n1,,0.5\n3,,1\n");
        let err = load_features_with_views(outside.path(), 2).unwrap_err();
        assert!(matches!(err, CamelError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_features("/nonexistent/features.csv").unwrap_err();
        assert!(matches!(err, CamelError::Io { .. }));
    }
}

//! Canonical JSON interchange format.
//!
//! ```json
//! { "classes": ["wave", …],
//!   "samples": [ { "label": 0, "subject": 3, "view": 1,
//!                  "frames": [ [ [x, y, z] × 25 ] × T ] } ],
//!   "split": { "protocol": "cross_subject", "train_ids": [1, 2] } }
//! ```
//!
//! `split` and the per-sample `source` string are optional. Numbers are
//! written with the shortest decimal form that parses back to the same
//! `f64`, so a write/parse round trip is exact.

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Frame, SkeletonSequence, Split};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDoc {
    classes: Vec<String>,
    samples: Vec<SampleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleDoc {
    label: usize,
    subject: u32,
    view: u32,
    frames: Vec<Frame>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    source: String,
}

pub fn parse_canonical_json(text: &str) -> Result<Dataset, DataError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: DatasetDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        DataError::Validation {
            path: if path == "." { "$".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    let dataset = Dataset {
        class_names: doc.classes,
        samples: doc
            .samples
            .into_iter()
            .map(|s| SkeletonSequence {
                frames: s.frames,
                label: s.label,
                subject_id: s.subject,
                view_id: s.view,
                source: s.source,
            })
            .collect(),
        split: doc.split,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn write_canonical_json(dataset: &Dataset) -> Result<String, DataError> {
    dataset.validate()?;
    let doc = DatasetDoc {
        classes: dataset.class_names.clone(),
        samples: dataset
            .samples
            .iter()
            .map(|s| SampleDoc {
                label: s.label,
                subject: s.subject_id,
                view: s.view_id,
                frames: s.frames.clone(),
                source: s.source.clone(),
            })
            .collect(),
        split: dataset.split.clone(),
    };
    let mut text = serde_json::to_string(&doc)
        .map_err(|e| DataError::Contract(format!("serializing dataset: {e}")))?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::super::{Protocol, JOINTS};
    use super::*;

    #[test]
    fn empty_dataset() {
        let ds = parse_canonical_json(r#"{"classes":[],"samples":[]}"#).unwrap();
        assert!(ds.samples.is_empty());
        assert!(ds.class_names.is_empty());
    }

    #[test]
    fn one_sample_round_trip_is_exact() {
        let mut frame = [[0.0; 3]; JOINTS];
        for (j, joint) in frame.iter_mut().enumerate() {
            *joint = [0.1 * j as f64, 1.0 / 3.0, -2.718281828459045e-7 * j as f64];
        }
        let mut s = SkeletonSequence::new(vec![frame, frame], 1);
        s.subject_id = 7;
        s.view_id = 2;
        s.source = "unit".into();
        let ds = Dataset {
            class_names: vec!["a".into(), "b".into()],
            samples: vec![s],
            split: Some(Split {
                protocol: Protocol::CrossView,
                train_ids: vec![2, 3],
            }),
        };
        let text = write_canonical_json(&ds).unwrap();
        let back = parse_canonical_json(&text).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.samples[0].frames.iter().flatten().flatten().zip(ds.samples[0].frames.iter().flatten().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(write_canonical_json(&back).unwrap(), text);
    }

    #[test]
    fn label_out_of_range() {
        let frame = format!("[{}]", vec!["[0,0,0]"; JOINTS].join(","));
        let text = format!(
            r#"{{"classes":["a"],"samples":[{{"label":1,"subject":0,"view":0,"frames":[{frame}]}}]}}"#
        );
        match parse_canonical_json(&text) {
            Err(DataError::Validation { path, .. }) => assert_eq!(path, "samples[0].label"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_the_path() {
        let text = r#"{"classes":["a"],"samples":[{"label":0,"subject":0,"view":0,"frames":[[[0,0,0]]]}]}"#;
        match parse_canonical_json(text) {
            Err(DataError::Validation { path, .. }) => {
                assert!(path.starts_with("samples[0].frames[0]"), "{path}")
            }
            other => panic!("{other:?}"),
        }
        match parse_canonical_json(r#"{"classes":["a"]}"#) {
            Err(DataError::Validation { message, .. }) => assert!(message.contains("samples")),
            other => panic!("{other:?}"),
        }
    }
}

use std::io::{BufRead, Write};

use serde_json::Value;
use thiserror::Error;

use super::{FinetunePromptPair, PromptError};

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Vocabulary { line: usize, source: PromptError },
    #[error("pair {index} is invalid: {source}")]
    InvalidPair { index: usize, source: PromptError },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Write one compact `{"prompt":..,"completion":..}` object per line.
///
/// Each line is fully encoded before any of its bytes reach the sink.
pub fn emit_finetune_jsonl<W: Write>(
    pairs: &[FinetunePromptPair],
    mut sink: W,
) -> Result<usize, JsonlError> {
    let mut line = Vec::new();
    for (index, pair) in pairs.iter().enumerate() {
        pair.validate()
            .map_err(|source| JsonlError::InvalidPair { index, source })?;
        line.clear();
        serde_json::to_writer(&mut line, pair).expect("string fields always encode");
        line.push(b'\n');
        sink.write_all(&line)?;
    }
    sink.flush()?;
    Ok(pairs.len())
}

pub fn read_finetune_jsonl<R: BufRead>(source: R) -> Result<Vec<FinetunePromptPair>, JsonlError> {
    let mut pairs = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let parse_err = |message: String| JsonlError::Parse {
            line: line_no,
            message,
        };

        let value: Value = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(parse_err("expected a JSON object".into()));
        };
        let field = |key: &str| match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(parse_err(format!("`{key}` must be a string"))),
            None => Err(parse_err(format!("missing `{key}` key"))),
        };
        let pair = FinetunePromptPair {
            prompt: field("prompt")?,
            completion: field("completion")?,
        };
        if obj.len() != 2 {
            return Err(parse_err(format!(
                "expected exactly 2 keys, found {}",
                obj.len()
            )));
        }
        match pair.validate() {
            Ok(()) => pairs.push(pair),
            Err(source @ PromptError::Vocabulary(_)) => {
                return Err(JsonlError::Vocabulary {
                    line: line_no,
                    source,
                })
            }
            Err(other) => return Err(parse_err(other.to_string())),
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Label;

    #[test]
    fn worked_example_line() {
        let pair = FinetunePromptPair::new(
            "drug: pci-34051\ndrug target: hdac1\ngene mutation: crebbp".into(),
            Label::Resistant,
        )
        .unwrap();
        let mut out = Vec::new();
        assert_eq!(emit_finetune_jsonl(&[pair], &mut out).unwrap(), 1);
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"prompt\":\"drug: pci-34051\\ndrug target: hdac1\\ngene mutation: crebbp\",\"completion\":\" resistant\"}\n"
        );
    }

    #[test]
    fn empty_list_writes_nothing() {
        let mut out = Vec::new();
        assert_eq!(emit_finetune_jsonl(&[], &mut out).unwrap(), 0);
        assert!(out.is_empty());
        assert!(read_finetune_jsonl(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn missing_key_reports_line() {
        let input =
            b"{\"prompt\":\"drug: a\",\"completion\":\" sensitive\"}\n{\"prompt\":\"drug: b\"}\n";
        match read_finetune_jsonl(&input[..]) {
            Err(JsonlError::Parse { line: 2, message }) => assert!(message.contains("completion")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_completion_is_vocabulary_error() {
        let input = b"{\"prompt\":\"drug: a\",\"completion\":\" maybe\"}\n";
        assert!(matches!(
            read_finetune_jsonl(&input[..]),
            Err(JsonlError::Vocabulary { line: 1, .. })
        ));
    }

    #[test]
    fn extra_key_and_garbage_rejected() {
        let extra = b"{\"prompt\":\"drug: a\",\"completion\":\" sensitive\",\"x\":1}\n";
        assert!(matches!(
            read_finetune_jsonl(&extra[..]),
            Err(JsonlError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_finetune_jsonl(&b"not json\n"[..]),
            Err(JsonlError::Parse { line: 1, .. })
        ));
    }

    struct FailAfter(usize, Vec<u8>);

    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            if self.0 == 0 {
                return Err(std::io::Error::other("disk full"));
            }
            self.0 -= 1;
            self.1.extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_leaves_whole_lines() {
        let pairs: Vec<_> = (0..3)
            .map(|i| FinetunePromptPair::new(format!("drug: d{i}"), Label::Sensitive).unwrap())
            .collect();
        let mut sink = FailAfter(2, Vec::new());
        assert!(matches!(
            emit_finetune_jsonl(&pairs, &mut sink),
            Err(JsonlError::Io(_))
        ));
        let text = String::from_utf8(sink.1).unwrap();
        assert!(text.ends_with('\n'));
        assert_eq!(read_finetune_jsonl(text.as_bytes()).unwrap(), pairs[..2]);
    }
}

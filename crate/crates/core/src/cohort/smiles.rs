/// Cheap sanity check on a SMILES line; not a grammar.
///
/// Accepts non-empty text over letters, digits and `()[]=#@+-/\%.` with balanced
/// parentheses and brackets, where each ring-closure label (a digit outside brackets, or
/// `%nn`) occurs an even number of times. Digits inside brackets are isotopes, charges or
/// hydrogen counts and are not ring closures.
pub fn validate_smiles_lite(text: &str) -> bool {
    if text.is_empty() {
        return false;
    }
    let mut ring_counts = [0u32; 100];
    let mut depth = 0usize;
    let mut in_bracket = false;
    let mut chars = text.chars();

    while let Some(c) = chars.next() {
        match c {
            '(' if !in_bracket => depth += 1,
            ')' if !in_bracket => {
                if depth == 0 {
                    return false;
                }
                depth -= 1;
            }
            '[' if !in_bracket => in_bracket = true,
            ']' if in_bracket => in_bracket = false,
            '(' | ')' | '[' | ']' => return false,
            '%' if !in_bracket => {
                let (Some(a), Some(b)) = (chars.next(), chars.next()) else {
                    return false;
                };
                let (Some(a), Some(b)) = (a.to_digit(10), b.to_digit(10)) else {
                    return false;
                };
                ring_counts[(a * 10 + b) as usize] += 1;
            }
            '0'..='9' if !in_bracket => {
                ring_counts[c.to_digit(10).unwrap() as usize] += 1;
            }
            c if c.is_ascii_alphanumeric() => {}
            '=' | '#' | '@' | '+' | '-' | '/' | '\\' | '.' | '%' => {}
            _ => return false,
        }
    }
    depth == 0 && !in_bracket && ring_counts.iter().all(|n| n % 2 == 0)
}

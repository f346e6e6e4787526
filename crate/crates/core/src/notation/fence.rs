/// Content of the first fenced code block in an LLM response, or the whole
/// text when there is no fence. An unterminated fence runs to the end.
pub fn extract_code_block(response: &str) -> String {
    let Some(start) = response.find("```") else {
        return response.to_string();
    };
    let after = &response[start + 3..];
    // the rest of the opening line is the info string (e.g. `mermaid`)
    let body = match after.find('\n') {
        Some(i) => &after[i + 1..],
        None => "",
    };
    let end = body.find("```").unwrap_or(body.len());
    body[..end].trim_end_matches(['\n', '\r']).to_string()
}

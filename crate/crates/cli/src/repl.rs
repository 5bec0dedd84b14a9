use std::io::BufRead;

/// Accumulates input lines and yields complete `;`-terminated statements.
/// Semicolons inside single-quoted strings do not end a statement.
#[derive(Debug, Default)]
pub struct StatementBuffer {
    pending: String,
    in_string: bool,
}

impl StatementBuffer {
    pub fn push_line(&mut self, line: &str) -> Vec<String> {
        let mut done = Vec::new();
        for ch in line.chars() {
            match ch {
                '\'' => {
                    self.in_string = !self.in_string;
                    self.pending.push(ch);
                }
                ';' if !self.in_string => {
                    let stmt = self.pending.trim().to_string();
                    if !stmt.is_empty() {
                        done.push(stmt);
                    }
                    self.pending.clear();
                }
                _ => self.pending.push(ch),
            }
        }
        self.pending.push('\n');
        done
    }

    pub fn is_empty(&self) -> bool {
        self.pending.trim().is_empty()
    }

    /// Takes a pending `.command`, which is only recognized between statements.
    pub fn take_command(&mut self) -> Option<String> {
        let cmd = self.pending.trim();
        if !cmd.starts_with('.') {
            return None;
        }
        let cmd = cmd.to_string();
        self.pending.clear();
        Some(cmd)
    }

    /// Whatever is left once input ends, if anything.
    pub fn finish(&mut self) -> Option<String> {
        let rest = std::mem::take(&mut self.pending);
        let rest = rest.trim();
        (!rest.is_empty()).then(|| rest.to_string())
    }
}

pub enum Input {
    Statement(String),
    /// A `.command` other than `.exit`.
    Command(String),
    Exit,
}

/// Reads statements from `input`, calling `prompt` before each line.
pub fn read_inputs(
    input: impl BufRead,
    mut prompt: impl FnMut(bool),
    mut handle: impl FnMut(Input) -> bool,
) -> std::io::Result<()> {
    let mut buf = StatementBuffer::default();
    prompt(true);
    for line in input.lines() {
        for stmt in buf.push_line(&line?) {
            if !handle(Input::Statement(stmt)) {
                return Ok(());
            }
        }
        if let Some(cmd) = buf.take_command() {
            if matches!(cmd.as_str(), ".exit" | ".quit") {
                handle(Input::Exit);
                return Ok(());
            }
            handle(Input::Command(cmd));
        }
        prompt(buf.is_empty());
    }
    if let Some(rest) = buf.finish() {
        handle(Input::Statement(rest));
    }
    Ok(())
}

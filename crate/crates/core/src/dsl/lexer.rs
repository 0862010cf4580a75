use super::ast::Span;
use super::DslError;

/// Comment keys that attach to the following item.
pub const META_KEYS: [&str; 2] = ["desc", "source"];

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Meta(String, String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Meta(k, _) => format!("`# {k}:` comment"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    let mut lx = Lexer { src, chars: src.char_indices().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: u32,
    col: u32,
}

impl Lexer<'_> {
    fn bump(&mut self) -> Option<(usize, char)> {
        let c = self.chars.next()?;
        if c.1 == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|c| c.1)
    }

    fn pos(&mut self) -> usize {
        self.chars.peek().map(|c| c.0).unwrap_or(self.src.len())
    }

    fn err(&self, line: u32, col: u32, msg: impl Into<String>) -> DslError {
        DslError::Syntax { line, col, message: msg.into() }
    }

    fn next_token(&mut self) -> Result<Token, DslError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    let (line, col, start) = (self.line, self.col, self.pos());
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        text.push(c);
                        self.bump();
                    }
                    let body = text[1..].trim();
                    if let Some((k, v)) = body.split_once(':') {
                        let k = k.trim();
                        if META_KEYS.contains(&k) {
                            let span = Span { line, col, start, end: self.pos() };
                            return Ok(Token { tok: Tok::Meta(k.to_string(), v.trim().to_string()), span });
                        }
                    }
                }
                _ => break,
            }
        }
        let (line, col, start) = (self.line, self.col, self.pos());
        let Some((_, c)) = self.bump() else {
            return Ok(Token { tok: Tok::Eof, span: Span { line, col, start, end: start } });
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '=' | '!' | '<' | '>' => {
                let eq = self.peek() == Some('=');
                if eq {
                    self.bump();
                }
                match (c, eq) {
                    ('=', true) => Tok::EqEq,
                    ('!', true) => Tok::Ne,
                    ('<', false) => Tok::Lt,
                    ('<', true) => Tok::Le,
                    ('>', false) => Tok::Gt,
                    ('>', true) => Tok::Ge,
                    _ => return Err(self.err(line, col, format!("unexpected character `{c}`"))),
                }
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None | Some((_, '\n')) => return Err(self.err(line, col, "unterminated string")),
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match self.bump() {
                            Some((_, 'n')) => s.push('\n'),
                            Some((_, 't')) => s.push('\t'),
                            Some((_, '"')) => s.push('"'),
                            Some((_, '\\')) => s.push('\\'),
                            _ => return Err(self.err(line, col, "bad escape in string")),
                        },
                        Some((_, ch)) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut end = start + 1;
                let mut seen_dot = false;
                while let Some(ch) = self.peek() {
                    if ch.is_ascii_digit() || (ch == '.' && !seen_dot) {
                        seen_dot |= ch == '.';
                        self.bump();
                        end = self.pos();
                    } else {
                        break;
                    }
                }
                let text = &self.src[start..end];
                if text.ends_with('.') {
                    return Err(self.err(line, col, format!("malformed number `{text}`")));
                }
                Tok::Num(text.parse().map_err(|_| self.err(line, col, format!("malformed number `{text}`")))?)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::from(c);
                while let Some(ch) = self.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return Err(self.err(line, col, format!("unexpected character `{other}`"))),
        };
        Ok(Token { tok, span: Span { line, col, start, end: self.pos() } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_literals() {
        assert_eq!(
            toks("a<=1.5!=\"x\\\"y\""),
            vec![Tok::Ident("a".into()), Tok::Le, Tok::Num(1.5), Tok::Ne, Tok::Str("x\"y".into()), Tok::Eof]
        );
    }

    #[test]
    fn meta_comments_are_kept_and_plain_comments_dropped() {
        assert_eq!(
            toks("# desc: on top\n# plain note\nx"),
            vec![Tok::Meta("desc".into(), "on top".into()), Tok::Ident("x".into()), Tok::Eof]
        );
    }

    #[test]
    fn errors_carry_position() {
        match tokenize("x\n  @") {
            Err(DslError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("1.").is_err());
    }
}

//! Line protocol for black boxes living in another process.
//!
//! ```text
//! C: HELLO <n_features> <c|n,...>      S: OK | ERR <msg>
//! C: PREDICT <v1>,...,<vm>             S: 0 | 1
//! C: BATCH <k>  + k PREDICT lines      S: k label lines
//! C: BYE                               (server closes)
//! ```
//!
//! Numbers use the shortest round-trip decimal form, categoricals are sent
//! verbatim with `,` escaped as `%2C`. Lines end with `\n`.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use super::Oracle;
use crate::data::{FeatureSchema, Label, Record};
use crate::error::{OracleError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    /// `host:port`
    Tcp(String),
    /// Program and arguments, spoken to over stdin/stdout.
    Command(Vec<String>),
}

impl Endpoint {
    /// Parses `tcp:<host:port>` or `cmd:<argv>` (whitespace separated).
    pub fn parse(spec: &str) -> Option<Endpoint> {
        if let Some(addr) = spec.strip_prefix("tcp:") {
            return (!addr.is_empty()).then(|| Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = spec.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(|s| s.to_string()).collect();
            return (!argv.is_empty()).then_some(Endpoint::Command(argv));
        }
        None
    }
}

pub fn encode_record(schema: &FeatureSchema, record: &Record) -> String {
    (0..record.len())
        .map(|i| schema.format_value(i, record.get(i)).replace(',', "%2C"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn decode_record(schema: &FeatureSchema, text: &str) -> crate::error::Result<Record> {
    let fields: Vec<String> = text.split(',').map(|f| f.replace("%2C", ",")).collect();
    schema.parse_record(&fields)
}

fn parse_label(line: &str) -> Result<Label, OracleError> {
    match line {
        "0" => Ok(0),
        "1" => Ok(1),
        other if other.parse::<i64>().is_ok() => Err(OracleError::LabelOutOfDomain(other.to_string())),
        other => Err(OracleError::Malformed(other.to_string())),
    }
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Connection {
    fn send(&mut self, line: &str) -> Result<(), OracleError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, OracleError> {
        self.writer.flush()?;
        let mut line = String::new();
        let n = self.reader.read_line(&mut line)?;
        if n == 0 {
            return Err(OracleError::Transport("connection closed".into()));
        }
        Ok(line.trim_end_matches('\n').trim_end_matches('\r').to_string())
    }
}

/// Client side of the protocol. Requests from several threads are
/// serialized through one connection.
pub struct ExternalOracle {
    conn: Mutex<Connection>,
    schema: FeatureSchema,
}

impl ExternalOracle {
    fn handshake(mut conn: Connection, schema: &FeatureSchema) -> Result<Self, OracleError> {
        conn.send(&format!("HELLO {} {}", schema.len(), schema.kinds_signature()))?;
        let reply = conn.recv()?;
        if reply == "OK" {
            Ok(ExternalOracle { conn: Mutex::new(conn), schema: schema.clone() })
        } else if let Some(msg) = reply.strip_prefix("ERR") {
            Err(OracleError::SchemaMismatch(msg.trim().to_string()))
        } else {
            Err(OracleError::Malformed(reply))
        }
    }

    fn gate(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Oracle for ExternalOracle {
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        let mut c = self.gate();
        c.send(&format!("PREDICT {}", encode_record(&self.schema, record)))?;
        parse_label(&c.recv()?)
    }

    fn predict_batch(&self, records: &[Record]) -> Result<Vec<Label>, OracleError> {
        if records.is_empty() {
            return Ok(Vec::new());
        }
        let mut c = self.gate();
        c.send(&format!("BATCH {}", records.len()))?;
        for r in records {
            c.send(&format!("PREDICT {}", encode_record(&self.schema, r)))?;
        }
        (0..records.len()).map(|_| parse_label(&c.recv()?)).collect()
    }

    fn concurrency_safe(&self) -> bool {
        false
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        let c = self.conn.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = c.send("BYE");
        let _ = c.writer.flush();
        if let Some(mut child) = c.child.take() {
            let _ = child.wait();
        }
    }
}

/// Opens the transport and performs the handshake.
pub fn connect_external(endpoint: &Endpoint, schema: &FeatureSchema, timeout: Duration) -> Result<ExternalOracle, OracleError> {
    let conn = match endpoint {
        Endpoint::Tcp(addr) => {
            let stream = TcpStream::connect(addr)?;
            stream.set_read_timeout(Some(timeout))?;
            stream.set_nodelay(true)?;
            let reader = BufReader::new(stream.try_clone()?);
            Connection { reader: Box::new(reader), writer: Box::new(std::io::BufWriter::new(stream)), child: None }
        }
        Endpoint::Command(argv) => {
            let mut child = Command::new(&argv[0])
                .args(&argv[1..])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| OracleError::Transport(format!("cannot start `{}`: {e}", argv[0])))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Connection {
                reader: Box::new(BufReader::new(stdout)),
                writer: Box::new(std::io::BufWriter::new(stdin)),
                child: Some(child),
            }
        }
    };
    ExternalOracle::handshake(conn, schema)
}

/// Server side: answers requests with `oracle` until `BYE` or end of input.
/// Bad lines get `ERR <msg>` and the loop continues.
pub fn serve<R: BufRead, W: Write>(oracle: &dyn Oracle, schema: &FeatureSchema, mut input: R, mut output: W) -> Result<()> {
    let mut greeted = false;
    let mut line = String::new();
    let next_line = |input: &mut R, line: &mut String| -> std::io::Result<bool> {
        line.clear();
        let n = input.read_line(line)?;
        while line.ends_with('\n') || line.ends_with('\r') {
            line.pop();
        }
        Ok(n > 0)
    };
    let answer = |record_text: &str| -> String {
        match decode_record(schema, record_text) {
            Ok(r) => match oracle.predict(&r) {
                Ok(l) => l.to_string(),
                Err(_) => "ERR model-failure".to_string(),
            },
            Err(e) => format!("ERR {e}"),
        }
    };

    while next_line(&mut input, &mut line)? {
        let (cmd, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        let reply = match cmd {
            "HELLO" => {
                let mut parts = rest.split(' ');
                let n = parts.next().and_then(|t| t.parse::<usize>().ok());
                let kinds = parts.next().unwrap_or("");
                if n != Some(schema.len()) {
                    format!("ERR schema mismatch: expected {} features", schema.len())
                } else if kinds != schema.kinds_signature() {
                    format!("ERR schema mismatch: expected kinds {}", schema.kinds_signature())
                } else {
                    greeted = true;
                    "OK".to_string()
                }
            }
            "BYE" => {
                output.flush()?;
                return Ok(());
            }
            _ if !greeted => "ERR handshake required".to_string(),
            "PREDICT" => answer(rest),
            "BATCH" => match rest.parse::<usize>() {
                Ok(k) => {
                    let mut replies = Vec::with_capacity(k);
                    for _ in 0..k {
                        if !next_line(&mut input, &mut line)? {
                            break;
                        }
                        replies.push(match line.strip_prefix("PREDICT ") {
                            Some(r) => answer(r),
                            None => "ERR expected PREDICT".to_string(),
                        });
                    }
                    replies.join("\n")
                }
                Err(_) => "ERR bad batch size".to_string(),
            },
            other => format!("ERR unknown command {other}"),
        };
        output.write_all(reply.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

//! Length-prefixed pipe protocol for running the segmenter in another process.
//!
//! Request frame: `u32` byte length, then `H, W, C, x, y` as `u32` followed by
//! `H·W·C` `f32` pixels. Response frame: `u32` byte length, then a status byte;
//! status 0 is followed by `H, W` as `u32` and `H·W` `f32` mask values, any
//! other status by a UTF-8 error message. Everything is little endian. The
//! server exits cleanly on end of input.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use baps_core::{BlackboxOracle, Image, OracleError, PointPrompt, SoftMask};

use crate::{segment, GrowerParams};

const STATUS_OK: u8 = 0;
const STATUS_POINT_OUTSIDE: u8 = 1;
const STATUS_ERROR: u8 = 2;

fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::other("frame too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

fn u32_at(buf: &[u8], i: usize) -> usize {
    u32::from_le_bytes(buf[4 * i..4 * i + 4].try_into().unwrap()) as usize
}

fn encode_request(img: &Image, point: PointPrompt) -> Vec<u8> {
    let (h, w, c) = img.shape();
    let mut buf = Vec::with_capacity(20 + 4 * img.data().len());
    for v in [h, w, c, point.x, point.y] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in img.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn decode_request(buf: &[u8]) -> Result<(Image, PointPrompt), String> {
    if buf.len() < 20 {
        return Err("request header truncated".into());
    }
    let (h, w, c) = (u32_at(buf, 0), u32_at(buf, 1), u32_at(buf, 2));
    let point = PointPrompt::new(u32_at(buf, 3), u32_at(buf, 4));
    let body = &buf[20..];
    if body.len() != 4 * h * w * c {
        return Err(format!("expected {} pixel bytes, got {}", 4 * h * w * c, body.len()));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let img = Image::new(h, w, c, data).map_err(|e| e.to_string())?;
    Ok((img, point))
}

fn encode_response(result: &Result<SoftMask, OracleError>) -> Vec<u8> {
    match result {
        Ok(mask) => {
            let mut buf = vec![STATUS_OK];
            buf.extend_from_slice(&(mask.height() as u32).to_le_bytes());
            buf.extend_from_slice(&(mask.width() as u32).to_le_bytes());
            for v in mask.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf
        }
        Err(OracleError::PointOutside { .. }) => vec![STATUS_POINT_OUTSIDE],
        Err(e) => {
            let mut buf = vec![STATUS_ERROR];
            buf.extend_from_slice(e.to_string().as_bytes());
            buf
        }
    }
}

fn decode_response(buf: &[u8], point: PointPrompt) -> Result<SoftMask, OracleError> {
    match buf.first() {
        Some(&STATUS_OK) if buf.len() >= 9 => {
            let body = &buf[1..];
            let (h, w) = (u32_at(body, 0), u32_at(body, 1));
            let values = &body[8..];
            if values.len() != 4 * h * w {
                return Err(OracleError::Protocol("mask payload has wrong length".into()));
            }
            let data = values
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            SoftMask::new(h, w, data).map_err(|e| OracleError::Protocol(e.to_string()))
        }
        Some(&STATUS_POINT_OUTSIDE) => Err(OracleError::PointOutside { x: point.x, y: point.y }),
        Some(&STATUS_ERROR) => Err(OracleError::Remote(String::from_utf8_lossy(&buf[1..]).into_owned())),
        _ => Err(OracleError::Protocol("malformed response".into())),
    }
}

/// Answers segmentation requests from `input` on `output` until end of input.
pub fn serve<R: Read, W: Write>(input: R, output: W, params: GrowerParams) -> io::Result<()> {
    let mut input = BufReader::new(input);
    let mut output = BufWriter::new(output);
    while let Some(req) = read_frame(&mut input)? {
        let result = match decode_request(&req) {
            Ok((img, point)) => segment(&img, point, &params),
            Err(msg) => Err(OracleError::InvalidRequest(msg)),
        };
        write_frame(&mut output, &encode_response(&result))?;
    }
    Ok(())
}

struct Pipe {
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
}

/// Oracle client talking to a `serve` loop in a child process.
pub struct SubprocessOracle {
    child: Mutex<Child>,
    pipe: Mutex<Pipe>,
    calls: AtomicU64,
}

impl SubprocessOracle {
    /// Spawns `command` with piped stdin/stdout. The command must run [`serve`].
    pub fn spawn(mut command: Command) -> io::Result<Self> {
        let mut child = command.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| io::Error::other("child has no stdin"))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| io::Error::other("child has no stdout"))?;
        Ok(Self {
            child: Mutex::new(child),
            pipe: Mutex::new(Pipe {
                stdin: Some(BufWriter::new(stdin)),
                stdout: BufReader::new(stdout),
            }),
            calls: AtomicU64::new(0),
        })
    }
}

impl BlackboxOracle for SubprocessOracle {
    fn segment(&self, img: &Image, point: PointPrompt) -> Result<SoftMask, OracleError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut pipe = self
            .pipe
            .lock()
            .map_err(|_| OracleError::Protocol("pipe poisoned".into()))?;
        let stdin = pipe
            .stdin
            .as_mut()
            .ok_or_else(|| OracleError::Protocol("pipe closed".into()))?;
        write_frame(stdin, &encode_request(img, point))?;
        let resp =
            read_frame(&mut pipe.stdout)?.ok_or_else(|| OracleError::Protocol("server closed the pipe".into()))?;
        decode_response(&resp, point)
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        // closing stdin ends the server loop
        if let Ok(pipe) = self.pipe.get_mut() {
            if let Some(mut stdin) = pipe.stdin.take() {
                let _ = stdin.flush();
            }
        }
        if let Ok(child) = self.child.get_mut() {
            let _ = child.wait();
        }
    }
}

//! Raw tensor files: `u32` rank, `u64` dims, then row-major little-endian
//! `f64` payload. No padding, no trailer.

use std::io::{self, Read, Write};

use ndarray::{ArrayD, ArrayViewD, IxDyn};

/// Largest rank accepted when reading; guards against garbage headers.
const MAX_RANK: u32 = 8;

pub fn write_tensor<W: Write>(w: &mut W, t: ArrayViewD<'_, f64>) -> io::Result<()> {
    w.write_all(&(t.ndim() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    // iter() walks in logical row-major order regardless of memory layout
    let mut buf = Vec::with_capacity(t.len() * 8);
    for v in t.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_tensor<R: Read>(r: &mut R) -> io::Result<ArrayD<f64>> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4);
    if rank > MAX_RANK {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("tensor rank {rank} exceeds {MAX_RANK}"),
        ));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n <= isize::MAX as usize / 8)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "tensor too large"))?;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn header_layout() {
        let t = Array3::from_shape_fn((2, 1, 3), |(i, _, k)| (i * 3 + k) as f64).into_dyn();
        let mut buf = Vec::new();
        write_tensor(&mut buf, t.view()).unwrap();
        assert_eq!(buf.len(), 4 + 3 * 8 + 6 * 8);
        assert_eq!(&buf[..4], &3u32.to_le_bytes());
        assert_eq!(&buf[4..12], &2u64.to_le_bytes());
        assert_eq!(&buf[28..36], &0.0f64.to_le_bytes());
        assert_eq!(&buf[36..44], &1.0f64.to_le_bytes());
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn transposed_view_written_row_major() {
        let a = ndarray::arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, a.t().into_dyn()).unwrap();
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back, a.t().to_owned().into_dyn());
    }

    #[test]
    fn truncated_payload_errors() {
        let t = ndarray::arr1(&[1.0, 2.0]).into_dyn();
        let mut buf = Vec::new();
        write_tensor(&mut buf, t.view()).unwrap();
        buf.pop();
        let err = read_tensor(&mut buf.as_slice()).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::UnexpectedEof);
    }
}

"""A small convolutional encoder-decoder with hand-written backpropagation.

Everything runs on float64 numpy arrays of shape (batch, channels, H, W).
Convolutions are 3x3 with same-padding, realized as im2col + one BLAS matmul
per layer; the backward pass mirrors each op exactly, which is what makes the
finite-difference gradient checks meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TinyNetConfig:
    base_channels: int = 16
    depth: int = 1
    patch: int = 32
    condition_injection: bool = True  # condition always enters as an input channel

    def __post_init__(self):
        if self.base_channels < 4:
            raise ValueError("base_channels must be >= 4")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.patch % (2**self.depth) != 0:
            raise ValueError(
                f"patch ({self.patch}) must be a multiple of 2^depth ({2**self.depth})"
            )
        if not self.condition_injection:
            raise ValueError("condition injection is required for conditional models")

    def to_dict(self) -> dict:
        return {
            "base_channels": self.base_channels,
            "depth": self.depth,
            "patch": self.patch,
            "condition_injection": self.condition_injection,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TinyNetConfig":
        return cls(
            base_channels=int(d["base_channels"]),
            depth=int(d["depth"]),
            patch=int(d["patch"]),
            condition_injection=bool(d.get("condition_injection", True)),
        )


class Conv3x3:
    """3x3 convolution, zero same-padding, with bias.

    Both passes run as nine (C_out, C_in) x (C_in, B*plane) matrix products
    over shifted views of one flattened zero-padded plane buffer, so the only
    data movement is a single layout transpose per pass.  Outputs landing in
    the padding region (where a shift crosses a sample boundary) are sliced
    away and carry no gradient.
    """

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator, name: str):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.name = name
        scale = np.sqrt(2.0 / (in_ch * 9))
        self.weight = rng.standard_normal((out_ch, in_ch, 3, 3)) * scale
        self.bias = np.zeros(out_ch)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._buf = None
        self._shape = None

    def _taps(self, transpose: bool = False) -> list[np.ndarray]:
        # matmul needs contiguous operands to hit BLAS; the (Co, C) tap views
        # of the (Co, C, 3, 3) weight are strided and otherwise fall onto a
        # slow path.
        if transpose:
            return [
                np.ascontiguousarray(self.weight[:, :, ki, kj].T)
                for ki in range(3)
                for kj in range(3)
            ]
        return [
            np.ascontiguousarray(self.weight[:, :, ki, kj])
            for ki in range(3)
            for kj in range(3)
        ]

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, c, h, w = x.shape
        hp, wp = h + 2, w + 2
        length = b * hp * wp
        margin = wp + 2  # >= the largest tap shift
        xp = np.zeros((b, c, hp, wp))
        xp[:, :, 1 : h + 1, 1 : w + 1] = x
        buf = np.zeros((c, length + 2 * margin))
        buf[:, margin : margin + length] = np.ascontiguousarray(
            xp.transpose(1, 0, 2, 3)
        ).reshape(c, length)
        self._buf = buf
        self._shape = (b, c, h, w)

        taps = self._taps()
        out = np.zeros((self.out_ch, length))
        for ki in range(3):
            for kj in range(3):
                d = (ki - 1) * wp + (kj - 1)
                out += taps[ki * 3 + kj] @ buf[:, margin + d : margin + d + length]
        out += self.bias[:, None]
        out = out.reshape(self.out_ch, b, hp, wp)[:, :, 1 : h + 1, 1 : w + 1]
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        b, c, h, w = self._shape
        hp, wp = h + 2, w + 2
        length = b * hp * wp
        margin = wp + 2
        # Re-embed the output gradient with zero padding: discarded border
        # outputs contribute nothing.
        dpad = np.zeros((self.out_ch, b, hp, wp))
        dpad[:, :, 1 : h + 1, 1 : w + 1] = dout.transpose(1, 0, 2, 3)
        dflat = dpad.reshape(self.out_ch, length)

        self.dbias += dflat.sum(axis=1)
        buf = self._buf
        taps_t = self._taps(transpose=True)
        dbuf = np.zeros_like(buf)
        dw = np.empty_like(self.dweight)
        for ki in range(3):
            for kj in range(3):
                d = (ki - 1) * wp + (kj - 1)
                src = buf[:, margin + d : margin + d + length]
                dw[:, :, ki, kj] = dflat @ src.T
                dbuf[:, margin + d : margin + d + length] += taps_t[ki * 3 + kj] @ dflat
        self.dweight += dw
        dx = dbuf[:, margin : margin + length].reshape(c, b, hp, wp)[
            :, :, 1 : h + 1, 1 : w + 1
        ]
        return np.ascontiguousarray(dx.transpose(1, 0, 2, 3))

    def params(self) -> dict[str, np.ndarray]:
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}

    def grads(self) -> dict[str, np.ndarray]:
        return {f"{self.name}.weight": self.dweight, f"{self.name}.bias": self.dbias}


class SiLU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        # two-sided sigmoid avoids exp overflow for large negative inputs
        s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        self._x = x
        self._s = s
        return x * s

    def backward(self, dout: np.ndarray) -> np.ndarray:
        s = self._s
        return dout * s * (1.0 + self._x * (1.0 - s))


def _avgpool2(x: np.ndarray) -> np.ndarray:
    b, c, h, w = x.shape
    return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def _avgpool2_backward(dout: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(dout, 2, axis=2), 2, axis=3) * 0.25


def _upsample2(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def _upsample2_backward(dout: np.ndarray) -> np.ndarray:
    b, c, h, w = dout.shape
    return dout.reshape(b, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


class TinyNet:
    """Encoder-decoder with skip connections.

    Per level: two conv+SiLU blocks then a 2x2 average pool; the decoder
    mirrors this with nearest-neighbour upsampling and skip concatenation.
    Channel width doubles per level.  Input is (B, in_channels, H, W) with
    H, W multiples of 2^depth; output has a single channel.
    """

    def __init__(self, cfg: TinyNetConfig, in_channels: int = 3, seed: int = 0):
        self.cfg = cfg
        self.in_channels = in_channels
        rng = np.random.default_rng(seed)
        c = cfg.base_channels
        self.enc: list[tuple[Conv3x3, SiLU, Conv3x3, SiLU]] = []
        ch = in_channels
        for lvl in range(cfg.depth):
            out = c * 2**lvl
            self.enc.append(
                (
                    Conv3x3(ch, out, rng, f"enc{lvl}a"),
                    SiLU(),
                    Conv3x3(out, out, rng, f"enc{lvl}b"),
                    SiLU(),
                )
            )
            ch = out
        mid = c * 2**cfg.depth
        self.mid_a = Conv3x3(ch, mid, rng, "mid_a")
        self.mid_sa = SiLU()
        self.mid_b = Conv3x3(mid, mid, rng, "mid_b")
        self.mid_sb = SiLU()
        self.dec: list[tuple[Conv3x3, SiLU, Conv3x3, SiLU]] = []
        ch = mid
        for lvl in reversed(range(cfg.depth)):
            out = c * 2**lvl
            self.dec.append(
                (
                    Conv3x3(ch + out, out, rng, f"dec{lvl}a"),
                    SiLU(),
                    Conv3x3(out, out, rng, f"dec{lvl}b"),
                    SiLU(),
                )
            )
            ch = out
        self.out_conv = Conv3x3(ch, 1, rng, "out")

    def _layers(self):
        for block in self.enc:
            yield block[0]
            yield block[2]
        yield self.mid_a
        yield self.mid_b
        for block in self.dec:
            yield block[0]
            yield block[2]
        yield self.out_conv

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"expected (B, {self.in_channels}, H, W) input, got {x.shape}"
            )
        mult = 2**self.cfg.depth
        if x.shape[2] % mult or x.shape[3] % mult:
            raise ValueError(f"spatial dims {x.shape[2:]} must be multiples of {mult}")
        skips = []
        h = x
        for ca, sa, cb, sb in self.enc:
            h = sb.forward(cb.forward(sa.forward(ca.forward(h))))
            skips.append(h)
            h = _avgpool2(h)
        h = self.mid_sb.forward(self.mid_b.forward(self.mid_sa.forward(self.mid_a.forward(h))))
        self._skip_channels = []
        for (ca, sa, cb, sb), skip in zip(self.dec, reversed(skips)):
            h = _upsample2(h)
            self._skip_channels.append((h.shape[1], skip.shape[1]))
            h = np.concatenate([h, skip], axis=1)
            h = sb.forward(cb.forward(sa.forward(ca.forward(h))))
        return self.out_conv.forward(h)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        d = self.out_conv.backward(dout)
        dskips = []
        for (ca, sa, cb, sb), (up_ch, skip_ch) in zip(
            reversed(self.dec), reversed(self._skip_channels)
        ):
            d = ca.backward(sa.backward(cb.backward(sb.backward(d))))
            dskips.append(d[:, up_ch:])
            d = _upsample2_backward(d[:, :up_ch])
        d = self.mid_a.backward(self.mid_sa.backward(self.mid_b.backward(self.mid_sb.backward(d))))
        # dskips were collected decoder-side from shallowest to deepest level;
        # the reversed encoder walk needs deepest first.
        for (ca, sa, cb, sb), dskip in zip(reversed(self.enc), reversed(dskips)):
            d = _avgpool2_backward(d) + dskip
            d = ca.backward(sa.backward(cb.backward(sb.backward(d))))
        return d

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self._layers():
            out.update(layer.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self._layers():
            out.update(layer.grads())
        return out

    def zero_grads(self) -> None:
        for layer in self._layers():
            layer.dweight[:] = 0.0
            layer.dbias[:] = 0.0

    def set_params(self, values: dict[str, np.ndarray]) -> None:
        own = self.params()
        if set(values) != set(own):
            raise ValueError("parameter name mismatch")
        for name, arr in values.items():
            own[name][:] = arr

    def copy(self) -> "TinyNet":
        clone = TinyNet(self.cfg, self.in_channels, seed=0)
        clone.set_params({k: v.copy() for k, v in self.params().items()})
        return clone

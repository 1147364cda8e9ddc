"""U-Net feature export: pretrained checkpoint -> per-image latent tensors.

The exported map is the activation of the final decoder stage, i.e. the
64-channel block feeding the 1x1 classification head — the last layer that
still carries a full spatial feature vector per pixel. Files land as
`<image_id>.features.imtf`, rank-3 (H, V, 64), ready for floodkit's file
feature provider.
"""

from pathlib import Path

import numpy as np
import torch
from torch import nn

from floodkit import tensorfile
from floodkit.features import feature_path
from floodkit.manifest import load_entry_image, load_manifest

LATENT_CHANNELS = 64


def _double_conv(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class FloodUNet(nn.Module):
    """Compact U-Net: 13 bands in, 3 classes out, 64-channel final decoder."""

    def __init__(self, in_bands=13, n_classes=3):
        super().__init__()
        self.enc1 = _double_conv(in_bands, 32)
        self.enc2 = _double_conv(32, 64)
        self.bottleneck = _double_conv(64, 128)
        self.pool = nn.MaxPool2d(2)
        self.up2 = nn.ConvTranspose2d(128, 64, 2, stride=2)
        self.dec2 = _double_conv(128, 64)
        self.up1 = nn.ConvTranspose2d(64, 32, 2, stride=2)
        self.dec1 = _double_conv(64, LATENT_CHANNELS)
        self.head = nn.Conv2d(LATENT_CHANNELS, n_classes, 1)

    def features(self, x):
        """Final 64-channel decoder activation, spatial dims of the input."""
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        b = self.bottleneck(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up2(b), e2], dim=1))
        return self.dec1(torch.cat([self.up1(d2), e1], dim=1))

    def forward(self, x):
        return self.head(self.features(x))


def load_checkpoint(path) -> FloodUNet:
    model = FloodUNet()
    state = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(state, dict):
        raise ValueError(f"{path}: checkpoint must hold a state dict")
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise ValueError(f"{path}: checkpoint does not match the architecture: {exc}") from None
    model.eval()
    return model


def image_features(model: FloodUNet, image) -> np.ndarray:
    """Deterministic (H, V, 64) features for one image; invalid pixels zeroed."""
    data = np.asarray(image.data, dtype=np.float32).copy()
    data[~image.valid_mask] = 0.0
    height, width = data.shape[:2]
    # two pooling stages: pad spatial dims to a multiple of 4, crop after
    pad_h = (-height) % 4
    pad_w = (-width) % 4
    x = torch.from_numpy(np.transpose(data, (2, 0, 1)))[None]
    if pad_h or pad_w:
        x = nn.functional.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
    with torch.no_grad():
        fmap = model.features(x)[0, :, :height, :width]
    return np.transpose(fmap.numpy(), (1, 2, 0))


def export_features(checkpoint, manifest_path, out_dir) -> list:
    """Write `<id>.features.imtf` for every manifest entry; returns the paths."""
    model = load_checkpoint(checkpoint)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for entry in load_manifest(manifest_path):
        image = load_entry_image(entry)
        fmap = image_features(model, image)
        path = feature_path(out_dir, entry.image_id)
        tensorfile.write_tensor(path, fmap.astype(np.float32))
        written.append(path)
    return written

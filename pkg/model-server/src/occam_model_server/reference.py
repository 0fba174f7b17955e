"""Reference backend: SAM 2.1 Large point-prompted segmentation and an
ImageNet-pretrained ResNet-50 trunk (classifier head removed) for
2048-dimensional features.

Needs ``torch``/``torchvision`` plus the ``sam2`` package and its
checkpoint; import and load failures surface as :class:`BackendLoadError`
so the server can exit nonzero with a clear message.
"""
from __future__ import annotations

import numpy as np

from .config import AdapterConfig

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class BackendLoadError(RuntimeError):
    pass


class ReferenceBackend:
    deterministic = True

    def __init__(self, config: AdapterConfig):
        try:
            import torch
            import torchvision
        except ImportError as exc:
            raise BackendLoadError(
                "reference backend needs torch and torchvision "
                "(pip install 'occam-model-server[reference]')"
            ) from exc
        try:
            from sam2.sam2_image_predictor import SAM2ImagePredictor
        except ImportError as exc:
            raise BackendLoadError(
                "reference backend needs the sam2 package and its checkpoint "
                "(pip install sam2, or see github.com/facebookresearch/sam2)"
            ) from exc

        self._torch = torch
        if config.device == "auto":
            self.device = "cuda" if torch.cuda.is_available() else "cpu"
        else:
            self.device = config.device
        self.embed_dim = config.embed_dim
        self.max_masks_per_point = config.max_masks_per_point
        self.batch_size = config.batch_size

        try:
            self.predictor = SAM2ImagePredictor.from_pretrained(
                config.segmentation_checkpoint, device=self.device
            )
        except Exception as exc:  # checkpoint download/load failures
            raise BackendLoadError(
                f"cannot load segmentation checkpoint {config.segmentation_checkpoint!r}: {exc}"
            ) from exc

        try:
            weights = torchvision.models.ResNet50_Weights.IMAGENET1K_V1
            trunk = torchvision.models.resnet50(weights=weights)
        except Exception as exc:
            raise BackendLoadError(f"cannot load ResNet-50 weights: {exc}") from exc
        trunk.fc = torch.nn.Identity()  # drop the classifier, keep the 2048-d pool
        self.embedder = trunk.eval().to(self.device)

        mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
        self._mean = mean.to(self.device)
        self._std = std.to(self.device)
        self.meta = {
            "backend": "reference",
            "segmentation_checkpoint": config.segmentation_checkpoint,
            "embedder": config.embedder_id,
            "device": self.device,
            "multimask_output": True,
            "normalization": {"mean": list(IMAGENET_MEAN), "std": list(IMAGENET_STD)},
        }

    def segment(self, image: np.ndarray, points: list[tuple[int, int]]):
        if not points:
            return []
        torch = self._torch
        results = []
        with torch.inference_mode():
            self.predictor.set_image(image)
            for idx, (x, y) in enumerate(points):
                masks, scores, _ = self.predictor.predict(
                    point_coords=np.array([[x, y]], dtype=np.float32),
                    point_labels=np.array([1], dtype=np.int64),
                    multimask_output=True,
                )
                order = np.argsort(-scores)[: self.max_masks_per_point]
                for slot in order:
                    grid = masks[slot].astype(bool)
                    if grid.any():
                        results.append((idx, grid, float(scores[slot])))
        return results

    def embed(self, patch: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.inference_mode():
            tensor = torch.from_numpy(np.ascontiguousarray(patch)).permute(2, 0, 1).float() / 255.0
            tensor = (tensor.to(self.device) - self._mean) / self._std
            feature = self.embedder(tensor.unsqueeze(0)).squeeze(0)
        return feature.cpu().numpy().astype(np.float64)

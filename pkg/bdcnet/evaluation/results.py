"""Results management for edge-benchmark evaluations."""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PRPoint:
    """Dataset-aggregated counts and scores at one threshold."""

    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_measure: float


@dataclass
class ImageSweep:
    """Counts of one image at every threshold of the grid."""

    image_id: str
    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def n_pred(self) -> np.ndarray:
        """Predicted edge pixels per threshold."""
        return self.tp + self.fp

    @property
    def n_gt(self) -> int:
        return int(self.tp[0] + self.fn[0])


@dataclass(frozen=True)
class ImageBest:
    image_id: str
    best_threshold: float
    best_f: float


@dataclass
class EvalSummary:
    """Complete benchmark results."""

    ods_f: float
    ods_threshold: float
    ois_f: float
    ap: float
    points: list[PRPoint] = field(default_factory=list)
    per_image: list[ImageBest] = field(default_factory=list)

    PR_COLUMNS = ("threshold", "tp", "fp", "fn", "precision", "recall", "f_measure")

    def summary_text(self) -> str:
        return f"ODS\t{self.ods_f:.4f}\nOIS\t{self.ois_f:.4f}\nAP\t{self.ap:.4f}\n"

    def export_pr_csv(self, output_path: Path) -> None:
        with open(output_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.PR_COLUMNS)
            for p in self.points:
                writer.writerow([f"{p.threshold:.4f}", p.tp, p.fp, p.fn, f"{p.precision:.6f}", f"{p.recall:.6f}", f"{p.f_measure:.6f}"])

    def export_summary(self, output_path: Path) -> None:
        Path(output_path).write_text(self.summary_text(), encoding="utf-8")

    def export_per_image_csv(self, output_path: Path) -> None:
        with open(output_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "best_threshold", "best_f"])
            for row in self.per_image:
                writer.writerow([row.image_id, f"{row.best_threshold:.4f}", f"{row.best_f:.6f}"])

    def export_json(self, output_path: Path) -> None:
        data = {
            "summary": {
                "ods": self.ods_f,
                "ods_threshold": self.ods_threshold,
                "ois": self.ois_f,
                "ap": self.ap,
            },
            "pr_curve": [asdict(p) for p in self.points],
            "per_image": [asdict(row) for row in self.per_image],
        }
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)

    def export_all(self, output_dir: Path, per_image: bool = False) -> list[Path]:
        """Write pr_curve.csv, summary.txt, summary.json and optionally per_image.csv."""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        written = [output_dir / "pr_curve.csv", output_dir / "summary.txt", output_dir / "summary.json"]
        self.export_pr_csv(written[0])
        self.export_summary(written[1])
        self.export_json(written[2])
        if per_image:
            written.append(output_dir / "per_image.csv")
            self.export_per_image_csv(written[-1])
        return written

import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

os.environ.setdefault("RCB_LOG_LEVEL", "WARNING")

from pydantic import ValidationError

from rcbandit.core.config import Settings


class SettingsTests(unittest.TestCase):
    def _settings(self, **overrides) -> Settings:
        return Settings(_env_file=None, **overrides)

    def test_defaults(self) -> None:
        with patch.dict(os.environ, {}, clear=True):
            settings = self._settings()

        self.assertEqual(settings.output_root, Path("runs"))
        self.assertEqual(settings.workers, 1)
        self.assertEqual(settings.float_format, "%.17g")
        self.assertIsNone(settings.warfarin_data)

    def test_environment_overrides_output_root(self) -> None:
        with patch.dict(os.environ, {"RCB_OUTPUT_ROOT": "/tmp/elsewhere", "RCB_WORKERS": "4"}):
            settings = self._settings()

        self.assertEqual(settings.output_root, Path("/tmp/elsewhere"))
        self.assertEqual(settings.workers, 4)

    def test_explicit_out_wins(self) -> None:
        settings = self._settings(output_root=Path("runs"))
        self.assertEqual(settings.resolve_output_dir(Path("custom")), Path("custom"))
        self.assertEqual(settings.resolve_output_dir(), Path("runs"))

    def test_layout_paths(self) -> None:
        layout = self._settings().get_output_layout(Path("out"))
        self.assertEqual(layout.steps_csv, Path("out/steps.csv"))
        self.assertEqual(layout.config_echo, Path("out/config.echo"))
        self.assertEqual(layout.replications_dir, Path("out/replications"))

    def test_setup_directories_creates_the_tree(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            layout = self._settings().setup_directories(Path(tmp) / "nested" / "run")
            self.assertTrue(layout.root.is_dir())
            self.assertTrue(layout.replications_dir.is_dir())

    def test_invalid_workers_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            self._settings(workers=0)

    def test_invalid_log_level_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            self._settings(log_level="LOUD")


if __name__ == "__main__":
    unittest.main()

"""Run configuration: a flat, sectioned INI file fully determines a run.

Unknown sections or keys are rejected.  Defaults reproduce the reference
parameter set; the encoder timing grid (slot period, default delay) is
derived from the source repetition rate rather than configured twice.
"""

import configparser
import io
from dataclasses import dataclass, field

from .channel import ChannelParams, DetectorParams, ExperimentParams
from .encoder import EncoderParams, ModulationSequence, DEFAULT_SEQUENCE_STRING
from .errors import ConfigError
from .skr import SkrParams
from .source import SourceParams

_KNOWN_KEYS = {
    "run": {"n_slots", "seed"},
    "source": {
        "mean_photon_number",
        "g2_zero",
        "decay_time_ps",
        "irf_sigma_ps",
        "rep_rate_hz",
    },
    "encoder": {
        "v_pi_volts",
        "delta_t_ps",
        "extinction_ratio_db",
        "total_loss_db",
        "p_mis",
        "filter_window_ps",
    },
    "channel": {"attenuation_db_per_km", "distance_km", "excess_loss_db"},
    "detector": {"decoder_efficiency", "detector_efficiency", "dark_rate_hz"},
    "skr": {
        "p_sift",
        "error_correction_efficiency",
        "encoder_efficiency",
        "decoder_efficiency",
        "detector_efficiency",
        "attenuation_db_per_km",
        "mean_photon_number",
        "g2_zero",
        "misencoding_prob",
        "dark_click_prob",
    },
    "sequence": {"symbols"},
}


@dataclass
class RunConfig:
    experiment: ExperimentParams = field(default_factory=ExperimentParams)
    skr: SkrParams = field(default_factory=SkrParams)
    n_slots: int = 100_000
    seed: int = 1

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls()

    @classmethod
    def from_ini(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_parser(parser, source_name=str(path))

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser, source_name: str = "<config>") -> "RunConfig":
        for section in parser.sections():
            if section not in _KNOWN_KEYS:
                raise ConfigError(f"unknown section [{section}] in {source_name}")
            unknown = set(parser[section]) - _KNOWN_KEYS[section]
            if unknown:
                raise ConfigError(
                    f"unknown keys {sorted(unknown)} in section [{section}] of {source_name}"
                )

        def getfloat(section, key, default):
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    return float(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"invalid float {raw!r} for {section}.{key} in {source_name}"
                    ) from exc
            return default

        def getint(section, key, default):
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    return int(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"invalid int {raw!r} for {section}.{key} in {source_name}"
                    ) from exc
            return default

        try:
            source = SourceParams(
                mean_photon_number=getfloat("source", "mean_photon_number", 0.138),
                g2_zero=getfloat("source", "g2_zero", 0.005),
                decay_time_ps=getfloat("source", "decay_time_ps", 990.0),
                irf_sigma_ps=getfloat("source", "irf_sigma_ps", 50.0),
                rep_rate_hz=getfloat("source", "rep_rate_hz", 151.894e6),
            )
            slot_period = source.slot_period_ps
            encoder = EncoderParams(
                v_pi_volts=getfloat("encoder", "v_pi_volts", 4.2),
                delta_t_ps=getfloat("encoder", "delta_t_ps", slot_period / 2.0),
                slot_period_ps=slot_period,
                extinction_ratio_db=getfloat("encoder", "extinction_ratio_db", 27.7),
                total_loss_db=getfloat("encoder", "total_loss_db", 5.17),
                p_mis=getfloat("encoder", "p_mis", 0.0069),
                filter_window_ps=getfloat("encoder", "filter_window_ps", 2650.0),
            )
            channel = ChannelParams(
                attenuation_db_per_km=getfloat("channel", "attenuation_db_per_km", 0.18),
                distance_km=getfloat("channel", "distance_km", 0.0),
                excess_loss_db=getfloat("channel", "excess_loss_db", 0.0),
            )
            detector = DetectorParams(
                decoder_efficiency=getfloat("detector", "decoder_efficiency", 0.8),
                detector_efficiency=getfloat("detector", "detector_efficiency", 0.8),
                dark_rate_hz=getfloat("detector", "dark_rate_hz", 40.0),
            )
            sequence = ModulationSequence.from_string(
                parser.get("sequence", "symbols", fallback=DEFAULT_SEQUENCE_STRING)
            )
            experiment = ExperimentParams(
                source=source,
                encoder=encoder,
                channel=channel,
                detector=detector,
                sequence=sequence,
            )
            skr_dark = getfloat("skr", "dark_click_prob", 50.0 / source.rep_rate_hz)
            skr = SkrParams(
                rep_rate_hz=source.rep_rate_hz,
                p_sift=getfloat("skr", "p_sift", 0.5),
                error_correction_efficiency=getfloat(
                    "skr", "error_correction_efficiency", 1.16
                ),
                encoder_efficiency=getfloat("skr", "encoder_efficiency", 0.34),
                decoder_efficiency=getfloat("skr", "decoder_efficiency", 0.8),
                detector_efficiency=getfloat("skr", "detector_efficiency", 0.8),
                attenuation_db_per_km=getfloat("skr", "attenuation_db_per_km", 0.18),
                mean_photon_number=getfloat("skr", "mean_photon_number", 0.138),
                g2_zero=getfloat("skr", "g2_zero", 0.005),
                misencoding_prob=getfloat("skr", "misencoding_prob", 0.0069),
                dark_click_prob=skr_dark,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid configuration in {source_name}: {exc}") from exc

        n_slots = getint("run", "n_slots", 100_000)
        seed = getint("run", "seed", 1)
        if n_slots < 1:
            raise ConfigError("run.n_slots must be >= 1")
        return cls(experiment=experiment, skr=skr, n_slots=n_slots, seed=seed)

    def to_parser(self) -> configparser.ConfigParser:
        """Resolved snapshot; feeding it back reproduces the run."""
        exp = self.experiment
        parser = configparser.ConfigParser()
        parser["run"] = {"n_slots": str(self.n_slots), "seed": str(self.seed)}
        parser["source"] = {
            "mean_photon_number": repr(exp.source.mean_photon_number),
            "g2_zero": repr(exp.source.g2_zero),
            "decay_time_ps": repr(exp.source.decay_time_ps),
            "irf_sigma_ps": repr(exp.source.irf_sigma_ps),
            "rep_rate_hz": repr(exp.source.rep_rate_hz),
        }
        parser["encoder"] = {
            "v_pi_volts": repr(exp.encoder.v_pi_volts),
            "delta_t_ps": repr(exp.encoder.delta_t_ps),
            "extinction_ratio_db": repr(exp.encoder.extinction_ratio_db),
            "total_loss_db": repr(exp.encoder.total_loss_db),
            "p_mis": repr(exp.encoder.p_mis),
            "filter_window_ps": repr(exp.encoder.filter_window_ps),
        }
        parser["channel"] = {
            "attenuation_db_per_km": repr(exp.channel.attenuation_db_per_km),
            "distance_km": repr(exp.channel.distance_km),
            "excess_loss_db": repr(exp.channel.excess_loss_db),
        }
        parser["detector"] = {
            "decoder_efficiency": repr(exp.detector.decoder_efficiency),
            "detector_efficiency": repr(exp.detector.detector_efficiency),
            "dark_rate_hz": repr(exp.detector.dark_rate_hz),
        }
        parser["skr"] = {
            "p_sift": repr(self.skr.p_sift),
            "error_correction_efficiency": repr(self.skr.error_correction_efficiency),
            "encoder_efficiency": repr(self.skr.encoder_efficiency),
            "decoder_efficiency": repr(self.skr.decoder_efficiency),
            "detector_efficiency": repr(self.skr.detector_efficiency),
            "attenuation_db_per_km": repr(self.skr.attenuation_db_per_km),
            "mean_photon_number": repr(self.skr.mean_photon_number),
            "g2_zero": repr(self.skr.g2_zero),
            "misencoding_prob": repr(self.skr.misencoding_prob),
            "dark_click_prob": repr(self.skr.dark_click_prob),
        }
        parser["sequence"] = {"symbols": exp.sequence.as_string()}
        return parser

    def to_ini(self, path) -> None:
        with open(path, "w") as fh:
            self.to_parser().write(fh)

    def to_ini_string(self) -> str:
        buf = io.StringIO()
        self.to_parser().write(buf)
        return buf.getvalue()

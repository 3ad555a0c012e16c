import pytest

from config import (
    ModelConfig, TrainConfig, config_to_text, gradcheck_config, hop_widths, load_config, parse_config_text, replace,
    save_config,
)
from errors import ConfigError


def test_defaults_describe_the_full_model():
    cfg = ModelConfig()
    assert (cfg.num_blocks, cfg.embed_dim, cfg.num_heads) == (6, 256, 8)
    assert (cfg.spatial_hops, cfg.temporal_hops, cfg.num_frames, cfg.num_joints) == (3, 3, 81, 17)
    assert cfg.group_dim == 128 and cfg.heads_per_group == 4 and cfg.head_dim == 32
    assert cfg.spatial_hop_widths == (43, 43, 42)


def test_parse_accepts_symbols_and_comments():
    model_cfg, train_cfg = parse_config_text("""
        # tiny
        L = 2
        F=16   # width
        H=4
        use_tmhr = off
        lr=0.0005
        max_steps=none
    """)
    assert model_cfg == ModelConfig(num_blocks=2, embed_dim=16, num_heads=4, use_tmhr=False)
    assert train_cfg == TrainConfig(lr=0.0005)


@pytest.mark.parametrize("text,match", [
    ("depth=3", "unknown key 'depth'"),
    ("F", "expected key=value"),
    ("F=wide", "cannot read 'wide'"),
    ("use_stga=maybe", "cannot read 'maybe'"),
    ("F=6\nH=4", "heads per group"),
])
def test_parse_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_text_round_trip(tmp_path):
    model_cfg = gradcheck_config(use_sga=False)
    train_cfg = TrainConfig(batch_size=3, max_steps=7, progress=False)
    assert parse_config_text(config_to_text(model_cfg, train_cfg)) == (model_cfg, train_cfg)

    save_config(tmp_path / "run.cfg", model_cfg, train_cfg)
    assert load_config(tmp_path / "run.cfg") == (model_cfg, train_cfg)


def test_hop_widths_partition():
    for width in range(1, 20):
        for hops in range(1, width + 1):
            widths = hop_widths(width, hops)
            assert sum(widths) == width and max(widths) - min(widths) <= 1


@pytest.mark.parametrize("changes", [dict(lr_decay=0.0), dict(lr_decay=1.5), dict(batch_size=0), dict(beta1=1.0),
                                     dict(max_steps=-1), dict(target_scale=0.0)])
def test_invalid_train_config(changes):
    with pytest.raises(ConfigError):
        replace(TrainConfig(), **changes)


def test_replace_validates():
    assert replace(gradcheck_config(), num_blocks=0).num_blocks == 0
    with pytest.raises(ConfigError):
        replace(gradcheck_config(), root_joint=5)

import numpy as np
import pytest
import torch

from fcrn.model import ConvLSTMCell, FcrnConfig, build_model, parameter_count


class TestConfig:
    def test_channels_in_scales_with_inputs(self):
        assert FcrnConfig().channels_in == 2
        assert FcrnConfig(input_streams=("Y", "Dhat", "E")).channels_in == 6

    def test_height_must_match_pooling(self):
        with pytest.raises(ValueError, match="divisible"):
            build_model(FcrnConfig(feature_height=258))

    def test_mode_validated(self):
        with pytest.raises(ValueError):
            FcrnConfig(mode="OutX")


class TestShapes:
    def test_output_shape_contract(self):
        model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
        x = torch.randn(3, 7, 2, 260, 1)
        out, state = model(x)
        assert tuple(out.shape) == (3, 7, 2, 260, 1)

    def test_two_stacked_inputs_accepted(self):
        config = FcrnConfig(input_streams=("Y", "E"), lstm_filters=8, encoder_filters=(8, 16))
        model = build_model(config)
        out, _ = model(torch.randn(1, 4, 4, 260, 1))
        assert tuple(out.shape) == (1, 4, 2, 260, 1)

    def test_wrong_channel_count_rejected(self):
        model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
        with pytest.raises(ValueError):
            model(torch.randn(1, 4, 6, 260, 1))


class TestParameterCount:
    def test_default_configuration_near_five_million(self):
        count = parameter_count(build_model(FcrnConfig()))
        assert 4_700_000 <= count <= 5_700_000

    def test_input_count_changes_size_only_slightly(self):
        base = parameter_count(build_model(FcrnConfig()))
        four = parameter_count(build_model(FcrnConfig(input_streams=("Y", "X", "Dhat", "E"))))
        assert 0 < four - base < 0.01 * base


class TestRecurrentState:
    def test_fresh_state_per_call(self):
        torch.manual_seed(0)
        model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
        model.eval()
        x = torch.randn(1, 10, 2, 260, 1)
        with torch.no_grad():
            a, _ = model(x)
            b, _ = model(x)
        assert torch.equal(a, b)

    def test_carried_state_matches_single_pass(self):
        torch.manual_seed(1)
        model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
        model.eval()
        x = torch.randn(2, 12, 2, 260, 1)
        with torch.no_grad():
            whole, _ = model(x)
            first, state = model(x[:, :5])
            second, _ = model(x[:, 5:], state)
        stitched = torch.cat([first, second], dim=1)
        assert torch.allclose(whole, stitched, atol=1e-6)

    def test_batch_rows_independent(self):
        torch.manual_seed(2)
        model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
        model.eval()
        x = torch.randn(1, 6, 2, 260, 1)
        with torch.no_grad():
            single, _ = model(x)
            double, _ = model(torch.cat([x, x], dim=0))
        assert torch.allclose(double[0], double[1], atol=0)
        assert torch.allclose(single[0], double[0], atol=1e-6)


def test_convlstm_cell_gate_shapes():
    cell = ConvLSTMCell(16, 8, 24)
    state = cell.initial_state(3, 65, torch.device("cpu"), torch.float32)
    h, (h2, c2) = cell(torch.randn(3, 16, 65, 1), state)
    assert tuple(h.shape) == (3, 8, 65, 1)
    assert torch.equal(h, h2)

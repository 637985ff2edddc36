from __future__ import annotations

import unittest

from ntkparam.netspec import (
    LayerKind,
    LayerSpec,
    NetworkSpec,
    Parameterization,
    fan_in_layers,
    parametric_indices,
)


class NetworkSpecTests(unittest.TestCase):
    def test_fully_connected_builder(self) -> None:
        spec = NetworkSpec.fully_connected(5, [8, 16], outputs=3)
        kinds = [layer.kind for layer in spec.layers]
        self.assertEqual(
            kinds,
            [LayerKind.DENSE, LayerKind.RELU, LayerKind.DENSE, LayerKind.RELU, LayerKind.DENSE],
        )
        self.assertEqual(spec.depth, 3)
        self.assertEqual(spec.hidden_widths, (8, 16))
        self.assertEqual(spec.layers[-1].base_width, 3)
        self.assertFalse(spec.is_convolutional)

    def test_convolutional_builder(self) -> None:
        spec = NetworkSpec.convolutional(3, 8, [4, 4], readout="vec")
        self.assertTrue(spec.is_convolutional)
        self.assertEqual(spec.input_dim, 24)
        self.assertEqual(spec.input_channels, 3)
        self.assertEqual(spec.layers[-2].kind, LayerKind.VEC)
        self.assertEqual(spec.layers[0].filter_size, 3)

    def test_with_widths_leaves_readout_alone(self) -> None:
        spec = NetworkSpec.fully_connected(4, [8, 8], outputs=2).with_widths(32)
        self.assertEqual(spec.hidden_widths, (32, 32))
        self.assertEqual(spec.layers[-1].base_width, 2)
        self.assertEqual(spec.with_widths([1, 2]).hidden_widths, (1, 2))
        with self.assertRaises(ValueError):
            spec.with_widths([1, 2, 3])

    def test_dict_round_trip_and_hash(self) -> None:
        spec = NetworkSpec.convolutional(
            2, 4, [3], offsets=(-1, 0, 1), parameterization=Parameterization.NTK
        )
        restored = NetworkSpec.from_dict(spec.to_dict())
        self.assertEqual(restored, spec)
        self.assertEqual(restored.spec_hash(), spec.spec_hash())
        self.assertNotEqual(
            spec.with_parameterization(Parameterization.IMPROVED_STANDARD).spec_hash(),
            spec.spec_hash(),
        )

    def test_parameterization_flags(self) -> None:
        self.assertTrue(Parameterization.NAIVE_STANDARD.is_standard)
        self.assertTrue(Parameterization.IMPROVED_STANDARD.is_standard)
        self.assertFalse(Parameterization.NTK.is_standard)
        self.assertEqual(Parameterization("improved-standard"), Parameterization.IMPROVED_STANDARD)


class FanInTests(unittest.TestCase):
    def test_dense_fan_ins(self) -> None:
        spec = NetworkSpec.fully_connected(5, [8, 16], outputs=2)
        fans = list(fan_in_layers(spec))
        self.assertEqual([fan.base for fan in fans], [5, 8, 16])
        self.assertEqual([fan.scaled for fan in fans], [False, True, True])
        self.assertEqual([fan.is_readout for fan in fans], [False, False, True])
        self.assertEqual([fan.layer_index for fan in fans], parametric_indices(spec.layers))

    def test_vec_readout_multiplies_by_pixels(self) -> None:
        spec = NetworkSpec.convolutional(3, 6, [4], readout="vec")
        fans = list(fan_in_layers(spec))
        self.assertEqual(fans[0].base, 3)
        self.assertEqual(fans[0].filter_size, 3)
        self.assertEqual(fans[-1].base, 4 * 6)
        self.assertEqual(fans[-1].filter_size, 1)

    def test_gap_readout_keeps_channels(self) -> None:
        spec = NetworkSpec.convolutional(3, 6, [4], readout="gap")
        self.assertEqual(list(fan_in_layers(spec))[-1].base, 4)

    def test_layer_spec_dict(self) -> None:
        layer = LayerSpec.conv(4, (-2, 0, 2))
        self.assertEqual(layer.to_dict(), {"kind": "conv", "width": 4, "offsets": [-2, 0, 2]})
        self.assertEqual(LayerSpec.from_dict(layer.to_dict()), layer)
        self.assertEqual(LayerSpec.relu().to_dict(), {"kind": "relu"})


if __name__ == "__main__":
    unittest.main()

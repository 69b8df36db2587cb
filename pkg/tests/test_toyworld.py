"""Scene generator tests: determinism, the holdout split, caption grammar,
and rendering."""

import numpy as np
import pytest

from capood.errors import ValidationError
from capood.records import load_references
from capood.toyworld import (
    COLORS,
    SHAPES,
    Scene,
    SceneObject,
    ToyWorldConfig,
    build_pos_lexicon,
    build_vocabulary,
    caption_templates,
    encode_caption,
    generate_dataset,
    generate_world,
    render_scene,
    sample_scene,
    write_dataset,
)
from capood.rng import Rng

CFG = ToyWorldConfig()


class TestVocabularyAndLexicon:
    def test_specials_and_coverage(self):
        vocab = build_vocabulary()
        assert (vocab.bos_id, vocab.eos_id, vocab.unk_id) == (0, 1, 2)
        for word in list(COLORS) + list(SHAPES) + ["a", "the", "there", "is", "and", "near"]:
            assert vocab.id_of(word) >= 3

    def test_holdout_shapes_are_in_vocabulary(self):
        vocab = build_vocabulary()
        for shape in CFG.holdout_shapes:
            assert vocab.token(vocab.id_of(shape)) == shape

    def test_pos_tags(self):
        lex = build_pos_lexicon()
        assert lex.tag("red") == "ADJ"
        assert lex.tag("circle") == "NOUN"
        assert lex.tag("a") == "DET"
        assert lex.tag("the") == "DET"
        assert lex.tag("is") == "VERB"
        assert lex.tag("there") == "ADV"
        assert lex.tag("near") == "ADP"
        assert lex.tag("and") == "OTHER"

    def test_all_caption_words_encode_without_unknown(self):
        vocab = build_vocabulary()
        for scene in generate_dataset(CFG, 50, seed=3):
            ids = encode_caption(scene.caption, vocab)
            assert vocab.unk_id not in ids
            assert [vocab.token(i) for i in ids] == list(scene.caption)


class TestGeneration:
    def test_same_seed_same_dataset(self):
        a = generate_dataset(CFG, 20, seed=11)
        b = generate_dataset(CFG, 20, seed=11)
        for sa, sb in zip(a, b):
            assert sa.caption == sb.caption
            assert sa.objects == sb.objects
            assert sa.image == sb.image

    def test_different_seeds_differ(self):
        a = generate_dataset(CFG, 20, seed=1)
        b = generate_dataset(CFG, 20, seed=2)
        assert any(sa.image != sb.image for sa, sb in zip(a, b))

    def test_sample_ids_and_prefix(self):
        scenes = generate_dataset(CFG, 3, seed=0, prefix="eval")
        assert [s.sample_id for s in scenes] == ["eval_00000", "eval_00001", "eval_00002"]

    def test_train_split_avoids_holdout_shapes(self):
        for scene in generate_dataset(CFG, 60, seed=5):
            for obj in scene.objects:
                assert obj.shape not in CFG.holdout_shapes

    def test_holdout_split_uses_only_holdout_shapes(self):
        for scene in generate_dataset(CFG, 60, seed=5, holdout=True):
            for obj in scene.objects:
                assert obj.shape in CFG.holdout_shapes

    def test_both_object_counts_appear(self):
        counts = {len(s.objects) for s in generate_dataset(CFG, 200, seed=7)}
        assert counts == {1, 2}

    def test_objects_stay_inside_frame(self):
        for scene in generate_dataset(CFG, 80, seed=9):
            for obj in scene.objects:
                assert obj.radius + CFG.margin <= obj.cx < CFG.size - obj.radius - CFG.margin
                assert obj.radius + CFG.margin <= obj.cy < CFG.size - obj.radius - CFG.margin

    def test_two_objects_horizontally_separated(self):
        for scene in generate_dataset(CFG, 120, seed=13):
            if len(scene.objects) == 2:
                a, b = scene.objects
                assert abs(a.cx - b.cx) >= a.radius + b.radius + 4

    def test_world_splits(self):
        train, test_in, ood = generate_world(CFG, 30, 10, seed=21)
        assert (len(train), len(test_in), len(ood)) == (30, 10, 10)
        assert train[0].sample_id.startswith("train_")
        assert test_in[0].sample_id.startswith("in_")
        assert ood[0].sample_id.startswith("unknown_")
        for scene in train + test_in:
            assert all(o.shape not in CFG.holdout_shapes for o in scene.objects)
        for scene in ood:
            assert all(o.shape in CFG.holdout_shapes for o in scene.objects)
        again = generate_world(CFG, 30, 10, seed=21)
        assert [s.caption for s in again[0]] == [s.caption for s in train]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            generate_dataset(CFG, 0, seed=1)
        with pytest.raises(ValidationError):
            generate_world(CFG, 0, 5, seed=1)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            ToyWorldConfig(size=16)
        with pytest.raises(ValidationError):
            ToyWorldConfig(holdout_shapes=("hexagon",))
        with pytest.raises(ValidationError):
            ToyWorldConfig(holdout_shapes=SHAPES)
        with pytest.raises(ValidationError):
            ToyWorldConfig(holdout_shapes=())
        with pytest.raises(ValidationError):
            ToyWorldConfig(count_weights=(0.0, 0.0))


class TestCaptions:
    def test_caption_is_one_of_the_references(self):
        for scene in generate_dataset(CFG, 80, seed=17):
            assert scene.caption in scene.references

    def test_one_object_templates(self):
        obj = SceneObject("circle", "red", 20, 20, 6)
        refs = caption_templates([obj])
        assert refs == (
            ("a", "red", "circle"),
            ("there", "is", "a", "red", "circle"),
            ("the", "circle", "is", "red"),
        )

    def test_two_object_templates_ordered_left_to_right(self):
        left = SceneObject("square", "blue", 15, 30, 6)
        right = SceneObject("ring", "white", 45, 30, 7)
        refs = caption_templates([right, left])
        assert refs[0] == ("a", "blue", "square", "and", "a", "white", "ring")
        assert refs[1] == ("a", "blue", "square", "near", "a", "white", "ring")
        assert refs[2] == ("a", "white", "ring", "and", "a", "blue", "square")

    def test_reversed_reference_covers_second_object_first(self):
        for scene in generate_dataset(CFG, 120, seed=19):
            if len(scene.objects) == 2:
                ordered = sorted(scene.objects, key=lambda o: o.cx)
                assert scene.references[2][1] == ordered[1].color
                assert scene.references[2][2] == ordered[1].shape


class TestRendering:
    def test_object_color_present(self):
        obj = SceneObject("square", "red", 30, 30, 8)
        img = render_scene([obj], background=40, config=CFG)
        hits = np.all(img.pixels == np.array(COLORS["red"]), axis=2)
        assert hits.sum() == (2 * 8 + 1) ** 2

    def test_background_value_everywhere_else(self):
        obj = SceneObject("circle", "blue", 20, 20, 6)
        img = render_scene([obj], background=33, config=CFG)
        corner = img.pixels[60:, 60:]
        assert np.all(corner == 33)

    def test_every_shape_renders_nonempty_and_distinct(self):
        masks = {}
        for shape in SHAPES:
            obj = SceneObject(shape, "white", 32, 32, 8)
            img = render_scene([obj], background=20, config=CFG)
            mask = np.all(img.pixels == 245, axis=2)
            assert mask.any()
            masks[shape] = mask
        shapes = list(SHAPES)
        for i, a in enumerate(shapes):
            for b in shapes[i + 1 :]:
                assert not np.array_equal(masks[a], masks[b])

    def test_ring_has_hole(self):
        obj = SceneObject("ring", "green", 32, 32, 9)
        img = render_scene([obj], background=25, config=CFG)
        assert tuple(img.pixels[32, 32]) == (25, 25, 25)
        assert tuple(img.pixels[32, 32 + 8]) == COLORS["green"]

    def test_backgrounds_span_configured_range(self):
        rng = Rng(23)
        values = set()
        for i in range(200):
            scene = sample_scene(rng, CFG, f"s{i}")
            corner = scene.image.pixels[0, 0]
            values.add(int(corner[0]))
        assert min(values) >= 20 and max(values) <= 70
        assert len(values) > 20


class TestWriteDataset:
    def test_images_and_references_written(self, tmp_path):
        scenes = generate_dataset(CFG, 4, seed=29)
        write_dataset(scenes, tmp_path / "img", tmp_path / "refs.jsonl")
        for scene in scenes:
            assert (tmp_path / "img" / f"{scene.sample_id}.ppm").exists()
        refs = load_references(tmp_path / "refs.jsonl")
        assert set(refs) == {s.sample_id for s in scenes}
        first = scenes[0]
        assert refs[first.sample_id] == [list(r) for r in first.references]

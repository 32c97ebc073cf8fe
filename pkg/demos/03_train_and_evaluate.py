"""Train the quality model on a synthetic corpus and evaluate the fit.

Generates a small labeled corpus, trains for a handful of epochs (a couple
of minutes on CPU), and reports R^2 / MSE of the distribution means plus the
attribute group comparisons. For the full-scale run used by the acceptance
suite (500 images, 30 epochs), see tests/test_acceptance.py.
"""

import tempfile

from ruralhq.corpus import Corpus
from ruralhq.evaluation import attribute_group_report, eval_metrics
from ruralhq.nn import desk_spec, save_checkpoint
from ruralhq.synth import generate_synthetic_corpus
from ruralhq.training import TrainConfig, predict_corpus, split_dataset, train

workdir = tempfile.mkdtemp(prefix="train_demo_")
synth = generate_synthetic_corpus(seed=1, n_images=200, raters_per_image=15, side=64, out_dir=workdir)
corpus = Corpus(root=workdir)
corpus.ingest_images(synth.images)
for ballot in synth.ballots:
    corpus.submit_ballot(ballot)
print(f"{len(corpus)} images, {len(synth.ballots)} ballots in {workdir}")

spec = desk_spec()
config = TrainConfig(epochs=10, lr0=1e-3, seed=1)
params, history = train(corpus, config, spec)
for record in history:
    print(f"  epoch {record.epoch:2d}: train {record.train_loss:.5f}  val {record.val_loss:.5f}  lr {record.lr:g}")

_, _, test_ids = split_dataset(corpus.qualified_images(), config.split, config.seed)
truth = {i: corpus.distribution_of(i) for i in test_ids}
pred = predict_corpus(params, test_ids, corpus)
report = eval_metrics(pred, truth)
print(f"\nheld-out: R^2={report.r_squared:.3f}  MSE_avg={report.mse_avg:.3f}  MSE_std={report.mse_std:.3f}")

# Physical attributes vs predicted quality: taller, air-conditioned,
# tile-faced houses should score higher on this corpus by construction.
means = {i: d.mean for i, d in predict_corpus(params, corpus.image_ids(), corpus).items()}
for attribute in ("floors", "has_ac"):
    group_report = attribute_group_report(synth.images, means, attribute)
    cells = ", ".join(f"{g.label}: {g.mean:.2f} (n={g.count})" for g in group_report.groups)
    print(f"{attribute:8s} group means -> {cells}")
    worst = max(t.p for t in group_report.pairwise)
    print(f"         largest pairwise Welch p-value: {worst:.2e}")

ckpt = f"{workdir}/model.ckpt"
save_checkpoint(params, spec, ckpt)
print(f"\ncheckpoint written to {ckpt}")

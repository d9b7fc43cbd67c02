"""Chain mixing sets the effective sample size, and with it the estimate.

Two RBMs trained on the same data: a lightly trained one whose Gibbs chain
hops freely between modes, and a sharply trained one whose chain lingers.
The effective sample size (ESS) of a free-energy trace quantifies the
difference, and the latent-sample likelihood estimate at a fixed budget
tracks it: the poorly mixing chain covers fewer modes, so its estimate sits
further below the exact value.

Run:  python3 demos/mixing_and_ess.py
"""

import csleval as ce

train = ce.make_synthetic("tiny-bars", {"n": 500, "noise": 0.05}, seed=11)
test = ce.make_synthetic("tiny-bars", {"n": 200, "noise": 0.05}, seed=12)


def trained(epochs):
    return ce.train_rbm(
        ce.init_rbm(16, 5, seed=1, scale=0.01),
        train.vectors,
        ce.TrainConfig(algorithm="exact-gradient", learning_rate=0.3,
                       n_epochs=epochs, seed=1),
    )


print(f"{'model':>22}  {'ESS / N':>8}  {'estimate':>10}  {'exact':>10}  {'gap':>8}")
for label, epochs in [("lightly trained (150)", 150), ("sharply trained (1500)", 1500)]:
    model = trained(epochs)
    chain = ce.run_chain(
        model, ce.ChainConfig(n_samples=5_000, burn_in=1_000, thin=1, n_chains=1, seed=24)
    )
    ess = ce.effective_sample_size(ce.latent_series(model, chain))
    estimate = ce.csl(model, chain, test.vectors).mean_loglik
    exact = ce.exact_log_likelihood_many(model, test.vectors).mean()
    print(f"{label:>22}  {ess / len(chain):>8.3f}  {estimate:>10.4f}  "
          f"{exact:>10.4f}  {estimate - exact:>8.4f}")

print(
    "\nSharper training separates the modes, Gibbs sampling mixes slower, the"
    "\neffective sample size drops, and the fixed-budget estimate falls further"
    "\nbelow the exact value. The estimator measures the model and its sampler."
)

"""
Checking reverse-mode gradients against finite differences
==========================================================

"""
import numpy as np

from aste_pairs import autograd as ag
from aste_pairs.autograd import Parameter, grad_check

rng = np.random.default_rng(0)
x = rng.normal(size=(3, 4))
w = Parameter(rng.normal(size=(4, 5)), "w")
gold = np.eye(5)[[0, 3, 1]]

loss = lambda: ag.cross_entropy(ag.softmax(ag.gelu(x @ w)), gold)  # noqa: E731
print("loss", loss().item())
print("worst relative error", grad_check(loss, [w]))

# masked positions get exactly zero probability
scores = np.array([[5.0, 3.0, 1.0]])
print(ag.masked_softmax(scores, np.array([[True, False, True]])).data)

# a few Adam steps on a quadratic
p = Parameter(np.zeros(2), "p")
opt = ag.Adam([p], lr=0.1)
for step in range(5):
    d = p - np.array([3.0, -1.0])
    q = (d * d).sum()
    print(step, round(q.item(), 4))
    q.backward()
    opt.step()

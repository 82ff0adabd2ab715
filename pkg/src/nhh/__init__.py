"""Non-Hermitian Heisenberg-representation toolkit."""

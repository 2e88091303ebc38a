"""Monte Carlo laboratory for excited random walks in cookie environments."""

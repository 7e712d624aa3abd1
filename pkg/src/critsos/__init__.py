"""Lower bounds for polynomial minimisation via SOS modulo critical ideals."""

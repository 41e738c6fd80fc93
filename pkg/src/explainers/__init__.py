# Explainers Package

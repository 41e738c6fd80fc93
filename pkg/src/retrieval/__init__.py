# Retrieval Package

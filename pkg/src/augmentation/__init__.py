# Augmentation Package

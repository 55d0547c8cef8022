# Ce fichier rend le dossier tests importable comme un package Python

from pixcrypt.cli import run

run()

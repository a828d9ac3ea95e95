from app import create_cli

# Create CLI instance
cli = create_cli()

if __name__ == '__main__':
    cli()

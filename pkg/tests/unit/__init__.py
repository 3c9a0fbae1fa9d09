from dotenv import load_dotenv

if not load_dotenv():
    load_dotenv(".env.example")
